#include "laud/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace laud {

std::string Shape::str() const {
  std::ostringstream os;
  os << b << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Shape scalar_shape() { return Shape{1, 1, 1, 1}; }

namespace detail {

void TensorNode::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

}  // namespace detail

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  return full(s, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& s, double value, bool requires_grad) {
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = s;
  n->data.assign(static_cast<size_t>(s.numel()), value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data,
                         bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != s.numel())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + s.str());
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = s;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->shape;
}

std::span<const double> Tensor::data() const {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad())
    throw StateError("tensor has no gradient; run backward() first");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw DimensionError("item() on tensor of shape " + shape().str());
  return node_->data[0];
}

Tensor Tensor::detach() const {
  if (!node_) return Tensor();
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = node_->shape;
  n->data = node_->data;
  n->requires_grad = false;
  return Tensor(std::move(n));
}

Tensor Tensor::make_node(const Shape& s, std::vector<double> data,
                         std::vector<Tensor> parents,
                         std::function<void(detail::TensorNode&)> backward) {
  if (static_cast<int64_t>(data.size()) != s.numel())
    throw DimensionError("op result length " + std::to_string(data.size()) +
                         " does not match shape " + s.str());
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = s;
  n->data = std::move(data);
  bool any_grad = false;
  for (const auto& p : parents) any_grad = any_grad || p.requires_grad();
  n->requires_grad = any_grad;
  if (any_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void accumulate_grad(detail::TensorNode& node, std::span<const double> src) {
  node.ensure_grad();
  for (size_t i = 0; i < src.size(); ++i) node.grad[i] += src[i];
}

void Tensor::backward() const {
  if (!node_) throw StateError("backward() on an undefined tensor");
  if (numel() != 1)
    throw DimensionError("backward() requires a scalar, got shape " +
                         shape().str());
  if (!node_->requires_grad)
    throw StateError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS; child insertion order fixes the reverse
  // traversal and therefore the floating-point accumulation order.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> seen;
  struct Frame {
    detail::TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* n = *it;
    n->ensure_grad();  // reachable requires_grad nodes end with a populated grad
    if (n->backward) n->backward(*n);
  }
}

}  // namespace laud
