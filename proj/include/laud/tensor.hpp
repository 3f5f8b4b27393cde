#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "laud/errors.hpp"

namespace laud {

/// Dense rank-4 shape in (batch, channels, height, width) order.
struct Shape {
  int64_t b = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return b * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

Shape scalar_shape();

namespace detail {

// One node of the reverse-mode tape. `backward` reads this node's grad and
// accumulates into the parents' grads; it must handle grad allocation lazily.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Dense (B,C,H,W) tensor with an optional gradient slot. Copies are shallow:
/// two Tensor handles may share the same storage and tape node. Values are
/// held in double precision; checkpoints serialize single precision.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& s, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  /// Direct mutable access to the values. Only meaningful for leaves
  /// (parameters, inputs); mutating an interior node invalidates the tape.
  std::span<double> mutable_data();

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse-mode sweep from a scalar. Seeds d(self)/d(self) = 1 and
  /// accumulates grads into every reachable requires_grad node in a fixed
  /// topological order, so repeated runs are bit-identical.
  void backward() const;

  /// Value of a single-element tensor.
  double item() const;

  /// A grad-less leaf view sharing this tensor's values.
  Tensor detach() const;

  // --- op plumbing ---
  static Tensor make_node(const Shape& s, std::vector<double> data,
                          std::vector<Tensor> parents,
                          std::function<void(detail::TensorNode&)> backward);
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

/// Accumulate `src` into the grad slot of `node`, allocating it on demand.
void accumulate_grad(detail::TensorNode& node, std::span<const double> src);

}  // namespace laud
