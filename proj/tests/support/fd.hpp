#pragma once

// Central-difference gradient oracle, independent of the reverse sweep.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cwgan/ad/ops.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::testkit {

using ad::Tensor;

inline Tensor random_tensor(const ad::Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<Scalar> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<Scalar>(d(rng));
  return Tensor::from(shape, std::move(v), requires_grad);
}

/// sum(f(inputs) * weights) as a scalar; `weights` fixes a random projection
/// so every output element contributes.
inline double projected(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                        const std::vector<Tensor>& inputs, const std::vector<Scalar>& weights) {
  ad::NoGradGuard guard;
  const Tensor y = f(inputs);
  double s = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += static_cast<double>(y.data()[i]) * static_cast<double>(weights[i]);
  return s;
}

struct GradCheck {
  double max_rel_error = 0;  // worst over inputs of ||a - n|| / max(||a||, ||n||)
  double max_abs_grad = 0;
};

inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nn));
  if (scale < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

/// Compares analytic input gradients of sum(f(x) * R) against central
/// differences with step h, for every input that requires grad.
inline GradCheck gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                std::vector<Tensor> inputs, std::mt19937_64& rng, double h = 1e-5) {
  std::vector<Scalar> weights;
  {
    ad::NoGradGuard guard;
    const Tensor probe = f(inputs);
    std::uniform_real_distribution<double> d(-1, 1);
    weights.resize(probe.numel());
    for (auto& w : weights) w = static_cast<Scalar>(d(rng));
  }
  for (auto& x : inputs)
    if (x.requires_grad()) x.zero_grad();
  const Tensor y = f(inputs);
  const Tensor loss = ad::sum(ad::mul(y, Tensor::from(y.shape(), weights)));
  ad::backward(loss);

  GradCheck out;
  for (auto& x : inputs) {
    if (!x.requires_grad()) continue;
    std::vector<double> analytic, numeric;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      analytic.push_back(x.has_grad() ? static_cast<double>(x.grad()[i]) : 0.0);
      const Scalar saved = x.data()[i];
      x.data()[i] = saved + static_cast<Scalar>(h);
      const double up = projected(f, inputs, weights);
      x.data()[i] = saved - static_cast<Scalar>(h);
      const double down = projected(f, inputs, weights);
      x.data()[i] = saved;
      numeric.push_back((up - down) / (2 * h));
      out.max_abs_grad = std::max(out.max_abs_grad, std::abs(analytic.back()));
    }
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic, numeric));
  }
  return out;
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::testkit
