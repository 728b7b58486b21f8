#include <doctest.h>

#include <cmath>

#include "relsem/optim.hpp"

using namespace relsem;

namespace {

std::vector<Parameter> one_param(std::vector<float> w, std::vector<float> g, bool decay) {
  std::vector<Parameter> ps;
  const int n = static_cast<int>(w.size());
  ps.push_back({"w", Tensor::from({n}, std::move(w), true), decay});
  ps[0].tensor.zero_grad();
  auto* grad = ps[0].tensor.grad();
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] = g[i];
  return ps;
}

}  // namespace

TEST_CASE("two AdamW steps match a hand computation") {
  auto ps = one_param({1.0f, -2.0f}, {0.5f, -0.25f}, true);
  AdamW opt;
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.1;
  double w[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  const double g[2] = {0.5, -0.25};
  for (int t = 1; t <= 2; ++t) {
    opt.step(ps, static_cast<float>(lr));
    for (int i = 0; i < 2; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * (mh / (std::sqrt(vh) + eps) + wd * w[i]);
    }
  }
  CHECK(opt.steps() == 2);
  CHECK(ps[0].tensor.values()[0] == doctest::Approx(w[0]).epsilon(1e-6));
  CHECK(ps[0].tensor.values()[1] == doctest::Approx(w[1]).epsilon(1e-6));
}

TEST_CASE("parameters without decay only move by the gradient term") {
  auto ps = one_param({3.0f}, {0.0f}, false);
  AdamW opt;
  opt.step(ps, 0.1f);
  CHECK(ps[0].tensor.values()[0] == 3.0f);
  auto decayed = one_param({3.0f}, {0.0f}, true);
  AdamW opt2;
  opt2.step(decayed, 0.1f);
  CHECK(decayed[0].tensor.values()[0] == doctest::Approx(3.0 - 0.1 * 0.1 * 3.0));
}

TEST_CASE("clip_grad_norm rescales to the limit and reports the raw norm") {
  auto ps = one_param({0.0f, 0.0f}, {3.0f, 4.0f}, true);
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(ps[0].tensor.grad_values()[0] == doctest::Approx(0.6).epsilon(1e-5));
  CHECK(ps[0].tensor.grad_values()[1] == doctest::Approx(0.8).epsilon(1e-5));
  auto small = one_param({0.0f}, {0.5f}, true);
  CHECK(clip_grad_norm(small, 1.0) == doctest::Approx(0.5));
  CHECK(small[0].tensor.grad_values()[0] == 0.5f);
}

TEST_CASE("learning-rate schedule warms up then decays by cosine") {
  LrSchedule s;
  s.max_lr = 6e-4f;
  s.min_lr = 6e-5f;
  s.warmup = 500;
  s.total_steps = 5000;
  CHECK(s.at(0) == 0.0f);
  CHECK(s.at(250) == doctest::Approx(3e-4));
  CHECK(s.at(500) == doctest::Approx(6e-4));
  const double mid = 6e-5 + (6e-4 - 6e-5) * 0.5 * (1 + std::cos(M_PI * 0.5));
  CHECK(s.at(2750) == doctest::Approx(mid));
  CHECK(s.at(5000) == doctest::Approx(6e-5));
  CHECK(s.at(9000) == doctest::Approx(6e-5));
  for (std::int64_t t = 500; t < 5000; t += 50) CHECK(s.at(t + 50) <= s.at(t));
  s.constant = true;
  CHECK(s.at(0) == 6e-4f);
  CHECK(s.at(4999) == 6e-4f);
}
