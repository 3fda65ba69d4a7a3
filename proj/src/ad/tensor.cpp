#include "cwgan/ad/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace cwgan::inline CWGAN_PRECISION_NS::ad {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Scalar(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(ad::numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  if (ad::numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + to_string(shape) + " needs " +
                     std::to_string(ad::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(a)];
}

Scalar Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

Scalar Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("at(): index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl_->shape[axis]) throw ShapeError("at(): index out of range");
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw GraphError("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = value;
}

std::span<Scalar> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar(0));
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), Scalar(0)); }

Tensor Tensor::clone() const { return from(impl_->shape, impl_->data, false); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_result(std::string op, Shape shape, std::vector<Scalar> data,
                   std::vector<Tensor> parents, BackwardFn backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (t_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
      auto node = std::make_shared<Node>();
      node->op = std::move(op);
      for (const Tensor& p : parents) node->parent_requires_grad.push_back(p.requires_grad());
      node->parents = std::move(parents);
      node->backward = std::move(backward);
      impl->node = std::move(node);
      impl->requires_grad = true;
    }
  }
  return Tensor(std::move(impl));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on a null tensor");
  if (loss.numel() != 1 || loss.rank() > 1) {
    throw GraphError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw GraphError("backward: loss does not require grad");

  if (loss.is_leaf()) {
    Tensor leaf = loss;
    leaf.mutable_grad()[0] += Scalar(1);
    return;
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<TensorImpl*> order;
  std::unordered_map<TensorImpl*, Tensor> handles;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    Tensor tensor;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss, 0});
  visited.insert(loss.impl());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.tensor.node();
    if (node && node->spent) {
      throw GraphError("backward through spent graph at op '" + node->op +
                       "' (double backward is unsupported)");
    }
    if (node && top.next_parent < node->parents.size()) {
      const Tensor& parent = node->parents[top.next_parent++];
      const bool needs = node->parent_requires_grad[top.next_parent - 1];
      if (needs && !parent.is_leaf() && visited.insert(parent.impl()).second) {
        stack.push_back({parent, 0});
      }
      continue;
    }
    order.push_back(top.tensor.impl());
    handles.emplace(top.tensor.impl(), top.tensor);
    stack.pop_back();
  }

  std::unordered_map<TensorImpl*, std::vector<Scalar>> grads;
  grads[loss.impl()] = std::vector<Scalar>(1, Scalar(1));

  std::vector<std::vector<Scalar>*> buffers;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = handles.at(*it);
    auto node = t.node();
    auto found = grads.find(*it);
    if (found != grads.end()) {
      std::vector<Scalar> grad_out = std::move(found->second);
      grads.erase(found);
      buffers.assign(node->parents.size(), nullptr);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        Tensor& p = node->parents[i];
        if (!node->parent_requires_grad[i]) continue;
        if (p.is_leaf()) {
          p.mutable_grad();
          buffers[i] = &p.impl()->grad;
        } else {
          auto& g = grads[p.impl()];
          if (g.empty()) g.assign(p.numel(), Scalar(0));
          buffers[i] = &g;
        }
      }
      node->backward(t.data(), grad_out, buffers);
    }
    node->spent = true;
    node->backward = nullptr;
    node->parents.clear();
    node->parent_requires_grad.clear();
  }
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::ad
