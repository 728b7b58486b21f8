#pragma once

// Central-difference gradient checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "relsem/ops.hpp"
#include "relsem/rng.hpp"
#include "relsem/tensor.hpp"

namespace relsem::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = true, float scale = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.normal()) * scale;
  return Tensor::from(shape, std::move(v), requires_grad);
}

/// sum(out * R) for a fixed random R, so every output element carries a distinct weight.
inline Tensor project(const Tensor& out, std::uint64_t seed) {
  Rng rng(seed);
  return ops::sum(ops::mul(out, random_tensor(out.shape(), rng, false)));
}

struct GradCheck {
  double max_rel_error = 0.0;  // worst leaf, normwise ||a - n|| / max(||a||, ||n||)
  std::string worst_leaf;
  std::size_t entries = 0;
};

/// Compares backward() against (f(x + h) - f(x - h)) / 2h. `stride` > 1 checks
/// every stride-th entry of each leaf only.
inline GradCheck check_gradients(const std::vector<std::pair<std::string, Tensor>>& leaves,
                                 const std::function<Tensor()>& f, double h = 1e-3, std::size_t stride = 1) {
  auto leaf_copy = leaves;
  for (auto& [_, t] : leaf_copy) t.zero_grad();
  f().backward();
  GradCheck out;
  for (auto& [name, t] : leaf_copy) {
    const std::vector<float> analytic(t.grad_values().begin(), t.grad_values().end());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    auto& storage = t.storage();
    for (std::size_t i = 0; i < storage.size(); i += stride) {
      const float saved = storage[i];
      const float up = static_cast<float>(saved + h);
      const float down = static_cast<float>(saved - h);
      storage[i] = up;
      double plus, minus;
      {
        NoGradGuard guard;
        plus = f().item();
      }
      storage[i] = down;
      {
        NoGradGuard guard;
        minus = f().item();
      }
      storage[i] = saved;
      // Divide by the step actually taken after rounding to float.
      const double numeric = (plus - minus) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = analytic.empty() ? 0.0 : analytic[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++out.entries;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_leaf = name;
    }
  }
  return out;
}

}  // namespace relsem::testing
