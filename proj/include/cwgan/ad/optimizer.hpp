#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cwgan/ad/tensor.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

enum class OptimizerKind { adaptive_moment, rms_propagation };

/// Per-parameter optimizer accumulators keyed by parameter name.
///
/// adaptive_moment is Adam with bias correction; rms_propagation keeps a
/// decaying mean of squared gradients (decay `alpha`).
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adaptive_moment;
  double learning_rate = 0.00005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double alpha = 0.99;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::map<std::string, std::vector<Scalar>> first_moment;
  std::map<std::string, std::vector<Scalar>> second_moment;
};

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate);

/// Applies one update in place. Gradients are left untouched; clear them with
/// zero_grads. Throws std::invalid_argument naming any parameter without a grad.
void optimizer_step(OptimizerState& state, std::span<const NamedParameter> params);

void zero_grads(std::span<const NamedParameter> params);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
