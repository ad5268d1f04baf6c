#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hypernoise/autodiff.hpp"
#include "hypernoise/tensor.hpp"

namespace hypernoise {

/// Named trainable tensors, iterated in name order.
using ParameterSet = std::map<std::string, Tensor>;

std::size_t parameter_count(const ParameterSet& params);
double global_norm(const ParameterSet& grads);
std::uint64_t checksum(const ParameterSet& params);
bool all_finite(const ParameterSet& params);

/// How parameters enter a graph: as differentiable inputs (bound by name at
/// forward time) or baked in as constants.
enum class ParamMode { Trainable, Frozen };

/// Creates the node for parameter `name` in the requested mode.
NodeId parameter_node(Graph& graph, const ParameterSet& params, const std::string& name, ParamMode mode);

/// scale * (input * down^T) * up^T; down is r x n, up is m x r.
NodeId lora_term(Graph& graph, NodeId input, NodeId down, NodeId up, double scale);

}  // namespace hypernoise
