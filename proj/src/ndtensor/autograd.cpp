#include "glyphner/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "glyphner/errors.hpp"

namespace glyphner::nd {
namespace {

std::atomic<std::uint64_t> g_next_order{1};

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Tensor* Node::input_grad(std::size_t i) {
  auto& in = inputs.at(i);
  return in->requires_grad ? &in->grad_buffer() : nullptr;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->order = g_next_order.fetch_add(1, std::memory_order_relaxed);
  return Var(std::move(node));
}

Var Var::leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->order = g_next_order.fetch_add(1, std::memory_order_relaxed);
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node& self)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->order = g_next_order.fetch_add(1, std::memory_order_relaxed);
  node->requires_grad = std::ranges::any_of(inputs, [](const Var& v) { return v.requires_grad(); });
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& v : inputs) node->inputs.push_back(v.node());
    node->backprop = std::move(backprop);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss) throw ShapeError("backward on an empty variable");
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::ranges::sort(order, [](const Node* a, const Node* b) { return a->order > b->order; });

  loss.node()->grad_buffer()[0] += 1.0;
  for (Node* n : order) {
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

}  // namespace glyphner::nd
