#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vtb/tensor.hpp"

namespace vtb::nn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value in the computation graph. `backward` reads this node's grad and
// accumulates into the parents' grads.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad() { node_->grad = Tensor(); }

 private:
  NodePtr node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

// While alive on this thread, results are recorded as constants (no graph).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// Builds a result node. If no input requires grad, or grad is disabled, the
// node is a constant and `backward` is dropped.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Seeds d(root)/d(root) = 1 (root must hold one element) and propagates in
// reverse topological order.
void backward(const Var& root);

// Seeds root's gradient with `seed` (same shape as root).
void backward(const Var& root, const Tensor& seed);

}  // namespace vtb::nn
