#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "glyphner/tensor.hpp"

namespace glyphner::nd {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded value in the computation graph. Op results keep their inputs
// alive, so holding the loss keeps the whole forward pass reachable.
struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient first reaches this node
  bool requires_grad = false;
  std::uint64_t order = 0;  // position in execution order
  std::vector<NodePtr> inputs;
  // Reads `self.grad` and accumulates into the inputs that require grad.
  std::function<void(Node& self)> backprop;

  Tensor& grad_buffer();
  // Gradient buffer of input `i`, or nullptr when that input is frozen.
  Tensor* input_grad(std::size_t i);
};

// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  // A frozen value: never receives gradients.
  static Var constant(Tensor value);
  // A trainable leaf: gradients accumulate until zero_grad().
  static Var leaf(Tensor value);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  const NodePtr& node() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

// Records an op result. When no input requires grad the result is a constant
// and `backprop` is dropped.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node& self)> backprop);

// Seeds d(loss)/d(loss) = 1 and runs every reachable node's backprop exactly
// once, in reverse execution order. Throws ShapeError for non-scalar losses.
void backward(const Var& loss);

}  // namespace glyphner::nd
