#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace relsem {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One value in the autodiff graph. `backward` reads this node's grad and
/// accumulates into its parents' grads.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until first written
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  float* grad_data() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad.data();
  }
};

/// Shared handle to a Node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : n_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  /// Size of dimension i; negative i counts from the end.
  int dim(int i) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(n_->value.size()); }

  float* data() { return n_->value.data(); }
  const float* data() const { return n_->value.data(); }
  std::span<const float> values() const { return n_->value; }
  std::vector<float>& storage() { return n_->value; }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool on) { n_->requires_grad = on; }
  bool has_grad() const { return !n_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first use.
  float* grad() { return n_->grad_data(); }
  std::span<const float> grad_values() const { return n_->grad; }
  void zero_grad() { n_->grad.clear(); }

  float item() const;

  /// Reverse-mode pass from this scalar; intermediate graph links are released.
  void backward();

  /// Same values, no graph history, no gradient.
  Tensor detach() const;

  Node* node() const { return n_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return n_; }

 private:
  std::shared_ptr<Node> n_;
};

bool grad_enabled();

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// New result node; records `parents` only when recording is on and one of them needs a gradient.
Tensor make_result(Shape shape, std::initializer_list<const Tensor*> parents);

}  // namespace relsem
