#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(HNLAB_PATH) + " " + args + " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_raw(const std::string& args) {
  const std::string cmd = std::string(HNLAB_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  f << s;
}

const char* kSmall = R"([run]
method = hypernoise
seed = 1

[generator]
kind = mlp
latent_dim = 2
output_dim = 3
hidden = 4

[reward]
kind = linear
c = 1, 0, 0

[train]
steps = 20
batch_size = 8
rank = 1

[eval]
heldout = 50
reference = 50
eval_every = 10
)";

}  // namespace

TEST(Cli, TrainSucceedsAndWritesArtifacts) {
  const fs::path dir = fresh("train");
  write(dir / "c.ini", kSmall);
  EXPECT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint.bin"));

  EXPECT_EQ(run("diversity --config " + (dir / "c.ini").string() + " --out " + (dir / "div").string() +
                " --seeds 3 --checkpoint " + (dir / "out" / "checkpoint.bin").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "div" / "diversity.csv"));

  EXPECT_EQ(run_raw("plot --csv " + (dir / "out" / "report.csv").string() + " --kind curve --out " +
                    (dir / "p.svg").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "p.svg"));
}

TEST(Cli, MalformedRewardExitsTwoWithoutFiles) {
  const fs::path dir = fresh("badreward");
  std::string text = kSmall;
  text.replace(text.find("c = 1, 0, 0"), 11, "c = 1, zero, 0");
  write(dir / "c.ini", text);
  EXPECT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "out").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, ConfigAndUsageErrorsExitTwo) {
  const fs::path dir = fresh("usage");
  EXPECT_EQ(run_raw(""), 2);
  EXPECT_EQ(run_raw("train"), 2);
  EXPECT_EQ(run("train --config /nonexistent.ini --out " + (dir / "o").string()), 2);
  write(dir / "c.ini", std::string(kSmall) + "bogus = 1\n");
  EXPECT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "o").string()), 2);
  // a hypernoise config cannot go through the baseline command
  write(dir / "ok.ini", kSmall);
  EXPECT_EQ(run("baseline --config " + (dir / "ok.ini").string() + " --out " + (dir / "o").string()), 2);
  write(dir / "bad.csv", "a,b\n1,2\n");
  EXPECT_EQ(run_raw("plot --csv " + (dir / "bad.csv").string() + " --kind curve --out " + (dir / "x.svg").string()),
            2);
}

TEST(Cli, RuntimeFailureExitsOne) {
  const fs::path dir = fresh("runtime");
  std::string text = kSmall;
  text.replace(text.find("rank = 1"), 8, "rank = 1\nlearning_rate = 1\nl2_ceiling = 1e-9");
  write(dir / "c.ini", text);
  EXPECT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "out").string()), 1);
  EXPECT_TRUE(fs::exists(dir / "out" / "FAILED"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));
}

TEST(Cli, SeedOverrideChangesTheRun) {
  const fs::path dir = fresh("seed");
  write(dir / "c.ini", kSmall);
  const auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  ASSERT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("train --config " + (dir / "c.ini").string() + " --out " + (dir / "b").string() +
                " --seed-override 2"),
            0);
  EXPECT_NE(slurp(dir / "a" / "report.csv"), slurp(dir / "b" / "report.csv"));
  EXPECT_NE(slurp(dir / "b" / "resolved_config.ini").find("seed = 2"), std::string::npos);
}
