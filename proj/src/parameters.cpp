#include "hypernoise/parameters.hpp"

#include <cmath>

#include "hypernoise/errors.hpp"

namespace hypernoise {

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

double global_norm(const ParameterSet& grads) {
  double s = 0.0;
  for (const auto& [name, t] : grads) {
    for (double v : t.data()) s += v * v;
  }
  return std::sqrt(s);
}

std::uint64_t checksum(const ParameterSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : params) {
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h = checksum(t, h);
  }
  return h;
}

bool all_finite(const ParameterSet& params) {
  for (const auto& [name, t] : params) {
    if (!t.all_finite()) return false;
  }
  return true;
}

NodeId parameter_node(Graph& graph, const ParameterSet& params, const std::string& name, ParamMode mode) {
  auto it = params.find(name);
  if (it == params.end()) throw StateError("missing parameter '" + name + "'");
  return mode == ParamMode::Trainable ? graph.input(name, true) : graph.constant(it->second);
}

NodeId lora_term(Graph& graph, NodeId input, NodeId down, NodeId up, double scale) {
  return graph.scale(graph.matmul_nt(graph.matmul_nt(input, down), up), scale);
}

}  // namespace hypernoise
