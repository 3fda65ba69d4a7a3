#include "cwgan/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

std::size_t normalize_axis(const char* op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& large) {
  if (small.size() > large.size()) return false;
  return std::equal(small.rbegin(), small.rend(), large.rbegin());
}

// Broadcast plan for a binary elementwise op: the result takes the larger
// shape and each operand repeats with period numel(operand).
struct Broadcast {
  Shape out;
  std::size_t n = 0;
  std::size_t period_a = 0;
  std::size_t period_b = 0;
};

Broadcast plan_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  Broadcast plan;
  if (a.shape() == b.shape()) {
    plan.out = a.shape();
  } else if (a.numel() >= b.numel() && is_suffix(strip_leading_ones(b.shape()), a.shape())) {
    plan.out = a.shape();
  } else if (b.numel() > a.numel() && is_suffix(strip_leading_ones(a.shape()), b.shape())) {
    plan.out = b.shape();
  } else {
    shape_error(op, a.shape(), b.shape());
  }
  plan.n = numel(plan.out);
  plan.period_a = a.numel();
  plan.period_b = b.numel();
  return plan;
}

template <typename Forward, typename GradA, typename GradB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Forward f, GradA ga, GradB gb) {
  const Broadcast plan = plan_broadcast(op, a, b);
  std::vector<Scalar> out(plan.n);
  const auto da = a.data();
  const auto db = b.data();
  if (plan.period_a == plan.n && plan.period_b == plan.n) {
    for (std::size_t i = 0; i < plan.n; ++i) out[i] = f(da[i], db[i]);
  } else {
    for (std::size_t i = 0; i < plan.n; ++i) out[i] = f(da[i % plan.period_a], db[i % plan.period_b]);
  }
  return make_result(op, plan.out, std::move(out), {a, b},
                     [a, b, plan, ga, gb](std::span<const Scalar>, std::span<const Scalar> g,
                                          std::span<std::vector<Scalar>* const> grads) {
                       const auto da = a.data();
                       const auto db = b.data();
                       for (std::size_t i = 0; i < plan.n; ++i) {
                         const std::size_t ia = i % plan.period_a;
                         const std::size_t ib = i % plan.period_b;
                         if (grads[0]) (*grads[0])[ia] += ga(da[ia], db[ib], g[i]);
                         if (grads[1]) (*grads[1])[ib] += gb(da[ia], db[ib], g[i]);
                       }
                     });
}

template <typename Forward, typename Derivative>
Tensor unary_op(const char* op, const Tensor& x, Forward f, Derivative d) {
  const auto dx = x.data();
  std::vector<Scalar> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = f(dx[i]);
  return make_result(op, x.shape(), std::move(out), {x},
                     [x, d](std::span<const Scalar> y, std::span<const Scalar> g,
                            std::span<std::vector<Scalar>* const> grads) {
                       const auto xv = x.data();
                       auto& gx = *grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(xv[i], y[i]);
                     });
}

// C[m, n] += A[m, k] * B[k, n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b,
             Scalar* c) {
  for (std::size_t i = 0; i < m; ++i) {
    Scalar* crow = c + i * n;
    const Scalar* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = arow[p];
      const Scalar* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m, k] += G[m, n] * B[k, n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Scalar* g, const Scalar* b,
             Scalar* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar* grow = g + i * n;
    Scalar* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar* brow = b + p * n;
      Scalar acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k, n] += A[m, k]^T * G[m, n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* g,
             Scalar* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar* arow = a + i * k;
    const Scalar* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = arow[p];
      Scalar* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  if (b.dim(-2) != k) shape_error("matmul", a.shape(), b.shape());
  const std::size_t n = b.dim(-1);
  const std::size_t batch = a.numel() / (m * k);
  const bool shared_b = b.rank() == 2;
  if (!shared_b) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      shape_error("matmul", a.shape(), b.shape());
    }
  }
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<Scalar> out(batch * m * n, Scalar(0));
  const Scalar* pa = a.data().data();
  const Scalar* pb = b.data().data();
  if (shared_b) {
    gemm_nn(batch * m, n, k, pa, pb, out.data());
  } else {
    for (std::size_t s = 0; s < batch; ++s) {
      gemm_nn(m, n, k, pa + s * m * k, pb + s * k * n, out.data() + s * m * n);
    }
  }
  return make_result("matmul", std::move(out_shape), std::move(out), {a, b},
                     [a, b, m, n, k, batch, shared_b](std::span<const Scalar>,
                                                      std::span<const Scalar> g,
                                                      std::span<std::vector<Scalar>* const> grads) {
                       const Scalar* pa = a.data().data();
                       const Scalar* pb = b.data().data();
                       if (shared_b) {
                         if (grads[0]) gemm_nt(batch * m, n, k, g.data(), pb, grads[0]->data());
                         if (grads[1]) gemm_tn(batch * m, n, k, pa, g.data(), grads[1]->data());
                         return;
                       }
                       for (std::size_t s = 0; s < batch; ++s) {
                         const Scalar* gs = g.data() + s * m * n;
                         if (grads[0]) gemm_nt(m, n, k, gs, pb + s * k * n, grads[0]->data() + s * m * k);
                         if (grads[1]) gemm_tn(m, n, k, pa + s * m * k, gs, grads[1]->data() + s * k * n);
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](Scalar x, Scalar y) { return x + y; },
      [](Scalar, Scalar, Scalar g) { return g; }, [](Scalar, Scalar, Scalar g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](Scalar x, Scalar y) { return x - y; },
      [](Scalar, Scalar, Scalar g) { return g; }, [](Scalar, Scalar, Scalar g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](Scalar x, Scalar y) { return x * y; },
      [](Scalar, Scalar y, Scalar g) { return g * y; },
      [](Scalar x, Scalar, Scalar g) { return g * x; });
}

Tensor scale(const Tensor& x, Scalar factor) {
  return unary_op(
      "scale", x, [factor](Scalar v) { return v * factor; },
      [factor](Scalar, Scalar) { return factor; });
}

Tensor add_scalar(const Tensor& x, Scalar value) {
  return unary_op(
      "add_scalar", x, [value](Scalar v) { return v + value; }, [](Scalar, Scalar) { return Scalar(1); });
}

Tensor neg(const Tensor& x) { return scale(x, Scalar(-1)); }

Tensor exp(const Tensor& x) {
  return unary_op(
      "exp", x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      "log", x, [](Scalar v) { return std::log(v); }, [](Scalar v, Scalar) { return Scalar(1) / v; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](Scalar v) { return std::tanh(v); },
      [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](Scalar v) { return v > 0 ? v : Scalar(0); },
      [](Scalar v, Scalar) { return v > 0 ? Scalar(1) : Scalar(0); });
}

Tensor log_sigmoid(const Tensor& x) {
  // log(sigmoid(v)) = min(v, 0) - log1p(exp(-|v|)); derivative is sigmoid(-v).
  return unary_op(
      "log_sigmoid", x,
      [](Scalar v) { return std::min(v, Scalar(0)) - std::log1p(std::exp(-std::abs(v))); },
      [](Scalar v, Scalar) { return Scalar(1) / (Scalar(1) + std::exp(v)); });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t width = x.dim(-1);
  const std::size_t rows = x.numel() / width;
  const auto dx = x.data();
  std::vector<Scalar> out(dx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = dx.data() + r * width;
    Scalar* o = out.data() + r * width;
    const Scalar mx = *std::max_element(in, in + width);
    Scalar total = 0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  return make_result("softmax", x.shape(), std::move(out), {x},
                     [rows, width](std::span<const Scalar> y, std::span<const Scalar> g,
                                   std::span<std::vector<Scalar>* const> grads) {
                       auto& gx = *grads[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t base = r * width;
                         Scalar dot = 0;
                         for (std::size_t j = 0; j < width; ++j) dot += g[base + j] * y[base + j];
                         for (std::size_t j = 0; j < width; ++j) {
                           gx[base + j] += y[base + j] * (g[base + j] - dot);
                         }
                       }
                     });
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("log_softmax: scalar input");
  const std::size_t width = x.dim(-1);
  const std::size_t rows = x.numel() / width;
  const auto dx = x.data();
  std::vector<Scalar> out(dx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = dx.data() + r * width;
    Scalar* o = out.data() + r * width;
    const Scalar mx = *std::max_element(in, in + width);
    Scalar total = 0;
    for (std::size_t j = 0; j < width; ++j) total += std::exp(in[j] - mx);
    const Scalar lse = mx + std::log(total);
    for (std::size_t j = 0; j < width; ++j) o[j] = in[j] - lse;
  }
  return make_result("log_softmax", x.shape(), std::move(out), {x},
                     [rows, width](std::span<const Scalar> y, std::span<const Scalar> g,
                                   std::span<std::vector<Scalar>* const> grads) {
                       auto& gx = *grads[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t base = r * width;
                         Scalar total = 0;
                         for (std::size_t j = 0; j < width; ++j) total += g[base + j];
                         for (std::size_t j = 0; j < width; ++j) {
                           gx[base + j] += g[base + j] - std::exp(y[base + j]) * total;
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  return make_result("sum", {}, {total}, {x},
                     [](std::span<const Scalar>, std::span<const Scalar> g,
                        std::span<std::vector<Scalar>* const> grads) {
                       for (auto& v : *grads[0]) v += g[0];
                     });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(x.numel());
  return make_result("mean", {}, {total * inv}, {x},
                     [inv](std::span<const Scalar>, std::span<const Scalar> g,
                           std::span<std::vector<Scalar>* const> grads) {
                       for (auto& v : *grads[0]) v += g[0] * inv;
                     });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  std::size_t a0 = normalize_axis("transpose", axis0, x.rank());
  std::size_t a1 = normalize_axis("transpose", axis1, x.rank());
  if (a0 == a1) return reshape(x, x.shape());
  if (a0 > a1) std::swap(a0, a1);
  const Shape& s = x.shape();
  // View as [outer, n0, mid, n1, inner]; output is [outer, n1, mid, n0, inner].
  std::size_t outer = 1, mid = 1, inner = 1;
  for (std::size_t i = 0; i < a0; ++i) outer *= s[i];
  for (std::size_t i = a0 + 1; i < a1; ++i) mid *= s[i];
  for (std::size_t i = a1 + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n0 = s[a0];
  const std::size_t n1 = s[a1];
  Shape out_shape = s;
  std::swap(out_shape[a0], out_shape[a1]);

  auto permute = [=](const Scalar* src, Scalar* dst, bool accumulate) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t m = 0; m < mid; ++m)
          for (std::size_t j = 0; j < n1; ++j) {
            const Scalar* from = src + (((o * n0 + i) * mid + m) * n1 + j) * inner;
            Scalar* to = dst + (((o * n1 + j) * mid + m) * n0 + i) * inner;
            if (accumulate) {
              for (std::size_t q = 0; q < inner; ++q) to[q] += from[q];
            } else {
              std::copy(from, from + inner, to);
            }
          }
  };
  std::vector<Scalar> out(x.numel());
  permute(x.data().data(), out.data(), false);

  // The inverse permutation maps output-gradient layout back onto the input.
  auto inverse = [=](const Scalar* g, Scalar* dst) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < n1; ++j)
        for (std::size_t m = 0; m < mid; ++m)
          for (std::size_t i = 0; i < n0; ++i) {
            const Scalar* from = g + (((o * n1 + j) * mid + m) * n0 + i) * inner;
            Scalar* to = dst + (((o * n0 + i) * mid + m) * n1 + j) * inner;
            for (std::size_t q = 0; q < inner; ++q) to[q] += from[q];
          }
  };
  return make_result("transpose", std::move(out_shape), std::move(out), {x},
                     [inverse](std::span<const Scalar>, std::span<const Scalar> g,
                               std::span<std::vector<Scalar>* const> grads) {
                       inverse(g.data(), grads[0]->data());
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose: rank < 2 for shape " + to_string(x.shape()));
  return transpose(x, -2, -1);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  std::vector<Scalar> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x},
                     [](std::span<const Scalar>, std::span<const Scalar> g,
                        std::span<std::vector<Scalar>* const> grads) {
                       auto& gx = *grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis("concat", axis, first.size());
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= first[i];
  for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != ax && s[i] != first[i]) shape_error("concat", first, s);
    }
    widths.push_back(s[ax] * inner);
    total += s[ax];
  }
  Shape out_shape = first;
  out_shape[ax] = total;
  const std::size_t row = total * inner;
  std::vector<Scalar> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Scalar* src = parts[p].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * widths[p], src + (o + 1) * widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result("concat", std::move(out_shape), std::move(out), std::move(parents),
                     [outer, row, widths](std::span<const Scalar>, std::span<const Scalar> g,
                                          std::span<std::vector<Scalar>* const> grads) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < grads.size(); ++p) {
                         if (grads[p]) {
                           Scalar* dst = grads[p]->data();
                           for (std::size_t o = 0; o < outer; ++o) {
                             const Scalar* src = g.data() + o * row + offset;
                             for (std::size_t q = 0; q < widths[p]; ++q) dst[o * widths[p] + q] += src[q];
                           }
                         }
                         offset += widths[p];
                       }
                     });
}

Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = normalize_axis("slice", axis, x.rank());
  const Shape& s = x.shape();
  if (begin > end || end > s[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis of extent " + std::to_string(s[ax]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t src_row = s[ax] * inner;
  const std::size_t dst_row = (end - begin) * inner;
  const std::size_t start = begin * inner;
  Shape out_shape = s;
  out_shape[ax] = end - begin;
  std::vector<Scalar> out(outer * dst_row);
  const Scalar* src = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(src + o * src_row + start, src + o * src_row + start + dst_row, out.data() + o * dst_row);
  }
  return make_result("slice", std::move(out_shape), std::move(out), {x},
                     [outer, src_row, dst_row, start](std::span<const Scalar>,
                                                      std::span<const Scalar> g,
                                                      std::span<std::vector<Scalar>* const> grads) {
                       Scalar* dst = grads[0]->data();
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t q = 0; q < dst_row; ++q)
                           dst[o * src_row + start + q] += g[o * dst_row + q];
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& index_shape) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be 2-D, got " + to_string(table.shape()));
  if (numel(index_shape) != ids.size()) {
    throw ShapeError("embedding: index shape " + to_string(index_shape) + " does not match " +
                     std::to_string(ids.size()) + " ids");
  }
  const std::size_t vocab = table.dim(0);
  const std::size_t width = table.dim(1);
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  std::vector<Scalar> out(ids.size() * width);
  const Scalar* src = table.data().data();
  for (std::size_t i = 0; i < saved.size(); ++i) {
    if (saved[i] < 0 || static_cast<std::size_t>(saved[i]) >= vocab) {
      throw ShapeError("embedding: index " + std::to_string(saved[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy(src + saved[i] * width, src + (saved[i] + 1) * width, out.data() + i * width);
  }
  Shape out_shape = index_shape;
  out_shape.push_back(width);
  return make_result("embedding", std::move(out_shape), std::move(out), {table},
                     [saved = std::move(saved), width](std::span<const Scalar>,
                                                       std::span<const Scalar> g,
                                                       std::span<std::vector<Scalar>* const> grads) {
                       Scalar* dst = grads[0]->data();
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         Scalar* row = dst + static_cast<std::size_t>(saved[i]) * width;
                         for (std::size_t j = 0; j < width; ++j) row[j] += g[i * width + j];
                       }
                     });
}

Tensor layer_norm_core(const Tensor& x, Scalar eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t width = x.dim(-1);
  const std::size_t rows = x.numel() / width;
  const auto dx = x.data();
  std::vector<Scalar> out(dx.size());
  std::vector<Scalar> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = dx.data() + r * width;
    Scalar mu = 0;
    for (std::size_t j = 0; j < width; ++j) mu += in[j];
    mu /= static_cast<Scalar>(width);
    Scalar var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<Scalar>(width);
    inv_std[r] = Scalar(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = (in[j] - mu) * inv_std[r];
  }
  return make_result("layer_norm", x.shape(), std::move(out), {x},
                     [rows, width, inv_std = std::move(inv_std)](
                         std::span<const Scalar> y, std::span<const Scalar> g,
                         std::span<std::vector<Scalar>* const> grads) {
                       auto& gx = *grads[0];
                       const Scalar w = static_cast<Scalar>(width);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t base = r * width;
                         Scalar mean_g = 0, mean_gy = 0;
                         for (std::size_t j = 0; j < width; ++j) {
                           mean_g += g[base + j];
                           mean_gy += g[base + j] * y[base + j];
                         }
                         mean_g /= w;
                         mean_gy /= w;
                         for (std::size_t j = 0; j < width; ++j) {
                           gx[base + j] += inv_std[r] * (g[base + j] - mean_g - y[base + j] * mean_gy);
                         }
                       }
                     });
}

Tensor straight_through(const Tensor& soft, const Tensor& hard) {
  if (soft.shape() != hard.shape()) shape_error("straight_through", soft.shape(), hard.shape());
  std::vector<Scalar> out(hard.data().begin(), hard.data().end());
  return make_result("straight_through", hard.shape(), std::move(out), {soft},
                     [](std::span<const Scalar>, std::span<const Scalar> g,
                        std::span<std::vector<Scalar>* const> grads) {
                       auto& gs = *grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
                     });
}

Tensor detach(const Tensor& x) { return x.clone(); }

Tensor nll_loss(const Tensor& logits, std::span<const std::int32_t> targets,
                std::int32_t ignore_index) {
  if (logits.rank() == 0) throw ShapeError("nll_loss: scalar logits");
  const std::size_t width = logits.dim(-1);
  const std::size_t rows = logits.numel() / width;
  if (targets.size() != rows) {
    throw ShapeError("nll_loss: " + std::to_string(targets.size()) + " targets for logits " +
                     to_string(logits.shape()));
  }
  std::vector<std::int32_t> saved(targets.begin(), targets.end());
  std::size_t counted = 0;
  double total = 0;
  const auto dx = logits.data();
  std::vector<Scalar> log_probs(dx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = dx.data() + r * width;
    const Scalar mx = *std::max_element(in, in + width);
    Scalar z = 0;
    for (std::size_t j = 0; j < width; ++j) z += std::exp(in[j] - mx);
    const Scalar lse = mx + std::log(z);
    for (std::size_t j = 0; j < width; ++j) log_probs[r * width + j] = in[j] - lse;
    if (saved[r] == ignore_index) continue;
    if (saved[r] < 0 || static_cast<std::size_t>(saved[r]) >= width) {
      throw ShapeError("nll_loss: target " + std::to_string(saved[r]) + " outside " +
                       std::to_string(width) + " classes");
    }
    total -= log_probs[r * width + static_cast<std::size_t>(saved[r])];
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("nll_loss: every position is ignored");
  const Scalar inv = Scalar(1) / static_cast<Scalar>(counted);
  return make_result("nll_loss", {}, {static_cast<Scalar>(total) * inv}, {logits},
                     [saved = std::move(saved), log_probs = std::move(log_probs), width, rows, inv,
                      ignore_index](std::span<const Scalar>, std::span<const Scalar> g,
                                    std::span<std::vector<Scalar>* const> grads) {
                       auto& gx = *grads[0];
                       const Scalar scale_g = g[0] * inv;
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (saved[r] == ignore_index) continue;
                         const std::size_t base = r * width;
                         for (std::size_t j = 0; j < width; ++j) {
                           gx[base + j] += scale_g * std::exp(log_probs[base + j]);
                         }
                         gx[base + static_cast<std::size_t>(saved[r])] -= scale_g;
                       }
                     });
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
