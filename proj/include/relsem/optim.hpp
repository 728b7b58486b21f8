#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relsem/tensor.hpp"

namespace relsem {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool decay = true;  // weight decay applies (matrices, embeddings); off for biases and norms
};

struct AdamWConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.1f;
};

/// AdamW with bias correction and decoupled weight decay (w -= lr * wd * w).
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  /// One update; parameters without a gradient are treated as having a zero gradient.
  void step(std::vector<Parameter>& params, float lr);

  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }

  // Moment buffers, one per parameter in step() order; exposed for checkpointing.
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  AdamWConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

/// Scales all gradients so their global L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(std::vector<Parameter>& params, double max_norm);

void zero_grads(std::vector<Parameter>& params);

struct LrSchedule {
  float max_lr = 6e-4f;
  float min_lr = 6e-5f;
  std::int64_t warmup = 500;
  std::int64_t total_steps = 0;
  bool constant = false;  // fixed max_lr (fine-tuning)

  /// Linear warmup from 0 to max_lr over `warmup` steps, cosine decay to
  /// min_lr at total_steps, clamped at min_lr afterwards.
  float at(std::int64_t step) const;
};

}  // namespace relsem
