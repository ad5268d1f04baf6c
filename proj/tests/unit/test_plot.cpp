#include <gtest/gtest.h>

#include "hypernoise/errors.hpp"
#include "hypernoise/plot.hpp"

using namespace hypernoise;

namespace {

const char* kCurve =
    "method,step,reward_mean,fidelity\n"
    "base,0,0.1,0\n"
    "hypernoise,10,0.3,0.05\n"
    "hypernoise,20,0.5,0.1\n"
    "direct_ft,10,0.4,0.5\n";

const char* kBars =
    "condition,label,value,error,n_pairs\n"
    "all,base,1.2,0.1,100\n"
    "all,hypernoise,1.1,0.05,100\n";

}  // namespace

TEST(Plot, ParseCsv) {
  const auto t = parse_csv(kCurve);
  EXPECT_EQ(t.header.size(), 4u);
  EXPECT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(*t.column("fidelity"), 3u);
  EXPECT_FALSE(t.column("nope"));
  EXPECT_THROW(parse_csv("a,b\n1\n"), SchemaError);
}

TEST(Plot, OutputIsDeterministicSvg) {
  const std::string a = plot_csv(kCurve, PlotKind::Curve), b = plot_csv(kCurve, PlotKind::Curve);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("hypernoise"), std::string::npos);
  EXPECT_NE(a.find("direct_ft"), std::string::npos);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  const std::string bars = plot_csv(kBars, PlotKind::Bars);
  EXPECT_EQ(bars, plot_csv(kBars, PlotKind::Bars));
  EXPECT_NE(bars.find("hypernoise"), std::string::npos);
}

TEST(Plot, CustomColumns) {
  const std::string s = plot_csv(kCurve, PlotKind::Curve, "fidelity", "reward_mean", "trade");
  EXPECT_NE(s.find("trade"), std::string::npos);
}

TEST(Plot, SchemaMismatches) {
  EXPECT_THROW(plot_csv(kBars, PlotKind::Curve), SchemaError);
  EXPECT_THROW(plot_csv(kCurve, PlotKind::Bars), SchemaError);
  EXPECT_THROW(plot_csv(kCurve, PlotKind::Curve, "step", "missing"), SchemaError);
  EXPECT_THROW(plot_csv("method,step,reward_mean\nx,1,abc\n", PlotKind::Curve), SchemaError);
}

TEST(Plot, EmptyData) {
  EXPECT_THROW(plot_csv("method,step,reward_mean\n", PlotKind::Curve), SchemaError);
  EXPECT_THROW(plot_csv("label,value,error\n", PlotKind::Bars), SchemaError);
  EXPECT_THROW(plot_kind_from_string("pie"), ConfigError);
}
