#include "cwgan/ad/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate) {
  if (!(learning_rate > 0)) throw std::invalid_argument("optimizer learning rate must be positive");
  OptimizerState state;
  state.kind = kind;
  state.learning_rate = learning_rate;
  return state;
}

void optimizer_step(OptimizerState& state, std::span<const NamedParameter> params) {
  if (!(state.learning_rate > 0)) throw std::invalid_argument("optimizer learning rate must be positive");
  std::string missing;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) missing += (missing.empty() ? "" : ", ") + p.name;
  }
  if (!missing.empty()) throw std::invalid_argument("optimizer_step: no gradient for " + missing);

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double lr = state.learning_rate;
  for (const auto& p : params) {
    Tensor param = p.tensor;
    auto values = param.data();
    const auto grad = param.grad();
    auto& v = state.second_moment[p.name];
    if (v.size() != values.size()) v.assign(values.size(), Scalar(0));

    if (state.kind == OptimizerKind::adaptive_moment) {
      auto& m = state.first_moment[p.name];
      if (m.size() != values.size()) m.assign(values.size(), Scalar(0));
      const double correction1 = 1.0 - std::pow(state.beta1, t);
      const double correction2 = 1.0 - std::pow(state.beta2, t);
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grad[i];
        m[i] = static_cast<Scalar>(state.beta1 * m[i] + (1.0 - state.beta1) * g);
        v[i] = static_cast<Scalar>(state.beta2 * v[i] + (1.0 - state.beta2) * g * g);
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        values[i] -= static_cast<Scalar>(lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
      }
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grad[i];
        v[i] = static_cast<Scalar>(state.alpha * v[i] + (1.0 - state.alpha) * g * g);
        values[i] -= static_cast<Scalar>(lr * g / (std::sqrt(static_cast<double>(v[i])) + state.epsilon));
      }
    }
  }
}

void zero_grads(std::span<const NamedParameter> params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
