#include "relsem/tensor.hpp"

#include <unordered_set>

#include "relsem/error.hpp"

namespace relsem {

namespace {
thread_local bool t_grad_enabled = true;
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(static_cast<std::size_t>(relsem::numel(shape)), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (static_cast<std::int64_t>(values.size()) != relsem::numel(shape))
    throw ShapeMismatch("tensor of shape " + shape_str(shape) + " given " + std::to_string(values.size()) +
                        " values");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

int Tensor::dim(int i) const {
  const int nd = ndim();
  if (i < 0) i += nd;
  if (i < 0 || i >= nd) throw ShapeMismatch("dimension " + std::to_string(i) + " of " + shape_str(shape()));
  return n_->shape[static_cast<std::size_t>(i)];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_str(shape()));
  return n_->value[0];
}

void Tensor::backward() {
  if (numel() != 1) throw ShapeMismatch("backward() needs a scalar, got " + shape_str(shape()));
  if (!n_->requires_grad) return;

  // Iterative post-order DFS gives a topological order. `order` owns its
  // nodes so releasing parent links below cannot free a node still pending.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(n_, 0);
  seen.insert(n_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      auto p = top.first->parents[top.second++];
      if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  n_->grad_data()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (node->backward && !node->grad.empty()) node->backward(*node);
    if (node != n_.get() && node->backward) {
      // Interior node: its gradient has been pushed to its parents.
      node->backward = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
    it->reset();
  }
  n_->backward = nullptr;
  n_->parents.clear();
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<Node>();
  n->shape = n_->shape;
  n->value = n_->value;
  return Tensor(std::move(n));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::initializer_list<const Tensor*> parents) {
  auto n = std::make_shared<Node>();
  n->value.assign(static_cast<std::size_t>(numel(shape)), 0.0f);
  n->shape = std::move(shape);
  if (t_grad_enabled) {
    for (const Tensor* p : parents) {
      if (p->defined() && p->requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad)
      for (const Tensor* p : parents)
        if (p->defined()) n->parents.push_back(p->node_ptr());
  }
  return Tensor(std::move(n));
}

}  // namespace relsem
