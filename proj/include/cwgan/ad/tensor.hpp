#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cwgan/precision.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes violate an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for misuse of the backward graph (non-scalar loss, reuse of a spent graph).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tensor;
struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;
};

// A backward rule receives the node's output values, the gradient of that
// output and one grad buffer per parent. Buffers for parents that do not
// require grad are null. Rules accumulate (+=) into the buffers.
using BackwardFn = std::function<void(std::span<const Scalar> output,
                                      std::span<const Scalar> grad_out,
                                      std::span<std::vector<Scalar>* const> parent_grads)>;

struct Node {
  std::string op;
  std::vector<Tensor> parents;
  std::vector<bool> parent_requires_grad;  // captured when the node is built
  BackwardFn backward;
  bool spent = false;
};

/// Shared handle to a dense row-major array with optional gradient tracking.
///
/// Copies share storage. A default-constructed Tensor is null; use the
/// factories to create one.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  /// Extent of an axis; negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<Scalar> data() { return impl_->data; }
  std::span<const Scalar> data() const { return impl_->data; }
  Scalar item() const;
  Scalar at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const Scalar> grad() const { return impl_->grad; }
  std::span<Scalar> mutable_grad();
  /// Fills the gradient with zeros (allocating it if needed).
  void zero_grad();

  bool is_leaf() const { return impl_->node == nullptr; }
  const std::shared_ptr<Node>& node() const { return impl_->node; }
  TensorImpl* impl() const { return impl_.get(); }

  /// Deep copy of the values; the copy is a leaf without gradient.
  Tensor clone() const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(std::string op, Shape shape, std::vector<Scalar> data,
                            std::vector<Tensor> parents, BackwardFn backward);

  std::shared_ptr<TensorImpl> impl_;
};

/// Whether newly created op results record a backward node (thread-local).
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. A node is attached only when recording is enabled
/// and at least one parent requires grad.
Tensor make_result(std::string op, Shape shape, std::vector<Scalar> data,
                   std::vector<Tensor> parents, BackwardFn backward);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate (+=).
/// The traversed nodes are marked spent; a second sweep through them throws.
void backward(const Tensor& loss);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
