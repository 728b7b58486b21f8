#include "relsem/optim.hpp"

#include <cmath>
#include <numbers>

#include "relsem/error.hpp"
#include "relsem/kernels.hpp"

namespace relsem {

void AdamW::step(std::vector<Parameter>& params, float lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
      v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
    }
  }
  if (m_.size() != params.size()) throw ShapeMismatch("AdamW: parameter list changed between steps");
  ++t_;
  const float bc1 = 1.0f - static_cast<float>(std::pow(config_.beta1, static_cast<double>(t_)));
  const float bc2 = 1.0f - static_cast<float>(std::pow(config_.beta2, static_cast<double>(t_)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].tensor;
    if (static_cast<std::int64_t>(m_[i].size()) != w.numel())
      throw ShapeMismatch("AdamW: moment size mismatch for " + params[i].name);
    const float* g = w.grad();
    kernels::adamw(w.data(), g, m_[i].data(), v_[i].data(), w.numel(), lr, config_.beta1, config_.beta2,
                   config_.eps, params[i].decay ? config_.weight_decay : 0.0f, bc1, bc2);
  }
}

double clip_grad_norm(std::vector<Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params)
    for (float g : p.tensor.grad_values()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = static_cast<float>(max_norm / (norm + 1e-6));
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      float* g = p.tensor.grad();
      for (std::int64_t i = 0; i < p.tensor.numel(); ++i) g[i] *= s;
    }
  }
  return norm;
}

void zero_grads(std::vector<Parameter>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

float LrSchedule::at(std::int64_t step) const {
  if (constant) return max_lr;
  if (step < 0) step = 0;
  if (warmup > 0 && step < warmup) return max_lr * static_cast<float>(step) / static_cast<float>(warmup);
  if (step >= total_steps) return min_lr;
  const double span = static_cast<double>(total_steps - warmup);
  const double progress = span > 0 ? static_cast<double>(step - warmup) / span : 1.0;
  const double c = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return static_cast<float>(min_lr + (max_lr - min_lr) * c);
}

}  // namespace relsem
