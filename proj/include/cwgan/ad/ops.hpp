#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwgan/ad/tensor.hpp"

// Differentiable operations. Every op validates shapes and throws ShapeError
// naming the op and the offending shapes.
//
// Elementwise binary ops broadcast by the leading-1 rule only: after dropping
// leading extents of 1, the smaller operand's shape must be a suffix of the
// larger one ([B, T, D] + [D], [B, T, D] + [T, D]). Anything else is rejected.

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

/// [..., m, k] x [k, n] or [..., m, k] x [..., k, n] (identical batch dims).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, Scalar factor);
Tensor add_scalar(const Tensor& x, Scalar value);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// log(sigmoid(x)), computed stably.
Tensor log_sigmoid(const Tensor& x);

/// Softmax over the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

/// Reductions over every element; the result has shape [].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Swaps two axes. The two-argument form swaps the last two.
Tensor transpose(const Tensor& x, int axis0, int axis1);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, int axis);
/// Half-open range [begin, end) along one axis.
Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);

/// Row gather from a [vocab, width] table; output shape is index_shape + [width].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& index_shape);

/// Normalizes the last axis to zero mean and unit (biased) variance.
Tensor layer_norm_core(const Tensor& x, Scalar eps);

/// Forward value is `hard`; the gradient passes to `soft` unchanged.
Tensor straight_through(const Tensor& soft, const Tensor& hard);

/// Same values, no graph linkage.
Tensor detach(const Tensor& x);

/// Mean negative log-likelihood of `targets` under softmax(logits) over the
/// last axis. Positions whose target equals `ignore_index` are excluded.
Tensor nll_loss(const Tensor& logits, std::span<const std::int32_t> targets,
                std::int32_t ignore_index);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
