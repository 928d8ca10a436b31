#include "vtb/autograd.hpp"

#include <unordered_set>

namespace vtb::nn {

Tensor& Node::grad_buffer() {
  if (grad.empty() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0f);
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad() && g_grad_enabled) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative DFS; graphs of deep encoders would otherwise recurse deeply.
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  Node* r = root.node().get();
  if (seed.shape() != r->value.shape()) throw ShapeError("backward seed shape mismatch");
  auto& g = r->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  const auto order = topo_order(r);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

void backward(const Var& root) {
  if (root.value().size() != 1) throw ShapeError("backward() without a seed needs a scalar root");
  backward(root, Tensor(root.shape(), 1.0f));
}

}  // namespace vtb::nn
