#pragma once

// Double-precision re-implementation of the decoder forward pass, written
// from the architecture description rather than the library code. Used to take
// finite differences without float32 rounding noise (about ulp(loss) / 2h,
// ~1e-4 absolute at h = 1e-3), which otherwise swamps small gradients.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "relsem/model.hpp"
#include "relsem/ops.hpp"

namespace relsem::testing {

class ReferenceModel {
 public:
  using Weights = std::map<std::string, std::vector<double>>;

  explicit ReferenceModel(const Model& model) : cfg_(model.config()) {
    for (const auto& p : model.parameters()) w_[p.name].assign(p.tensor.values().begin(), p.tensor.values().end());
  }

  Weights& weights() { return w_; }

  /// sum_i weight_i * CE(logits_i, target_i) / normalizer over B*T positions;
  /// targets < 0 are skipped. Causal or bidirectional per the model config.
  double loss(const std::vector<TokenId>& ids, int B, int T, const std::vector<std::int32_t>& targets,
              double normalizer) const {
    const int d = cfg_.d_model, V = cfg_.vocab_size;
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
      Mat x(T, std::vector<double>(d));
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < d; ++c)
          x[t][c] = at("wte", ids[static_cast<std::size_t>(b * T + t)] * d + c) + at("wpe", t * d + c);
      for (int l = 0; l < cfg_.n_layers; ++l) x = block(x, l);
      for (int t = 0; t < T; ++t) {
        const auto tgt = targets[static_cast<std::size_t>(b * T + t)];
        if (tgt < 0) continue;
        const auto h = layer_norm(x[t], "lnf");
        std::vector<double> z(static_cast<std::size_t>(V), 0.0);
        for (int v = 0; v < V; ++v)
          for (int c = 0; c < d; ++c) z[static_cast<std::size_t>(v)] += h[static_cast<std::size_t>(c)] * at("wte", v * d + c);
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double s = 0.0;
        for (double v : z) s += std::exp(v - mx);
        total += std::log(s) + mx - z[static_cast<std::size_t>(tgt)];
      }
    }
    return total / normalizer;
  }

 private:
  using Mat = std::vector<std::vector<double>>;

  double at(const std::string& name, int i) const { return w_.at(name)[static_cast<std::size_t>(i)]; }

  std::vector<double> layer_norm(const std::vector<double>& x, const std::string& prefix) const {
    const auto n = x.size();
    double m = 0.0, v = 0.0;
    for (double a : x) m += a;
    m /= static_cast<double>(n);
    for (double a : x) v += (a - m) * (a - m);
    v /= static_cast<double>(n);
    std::vector<double> y(n);
    for (std::size_t c = 0; c < n; ++c)
      y[c] = (x[c] - m) / std::sqrt(v + 1e-5) * at(prefix + ".g", static_cast<int>(c)) +
             at(prefix + ".b", static_cast<int>(c));
    return y;
  }

  // y = x W + b with W stored [in, out] row-major.
  std::vector<double> linear(const std::vector<double>& x, const std::string& prefix, int out) const {
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = at(prefix + ".b", o);
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * at(prefix + ".w", static_cast<int>(i) * out + o);
      y[static_cast<std::size_t>(o)] = s;
    }
    return y;
  }

  Mat block(const Mat& x, int layer) const {
    const std::string p = "h" + std::to_string(layer) + ".";
    const int T = static_cast<int>(x.size()), d = cfg_.d_model, H = cfg_.n_heads, dh = d / H;
    const int ff = cfg_.ff_dim();
    Mat qkv(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) qkv[static_cast<std::size_t>(t)] = linear(layer_norm(x[static_cast<std::size_t>(t)], p + "ln1"), p + "attn.qkv", 3 * d);
    Mat y(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int h = 0; h < H; ++h)
      for (int i = 0; i < T; ++i) {
        std::vector<double> s(static_cast<std::size_t>(T), -INFINITY);
        double mx = -INFINITY;
        for (int j = 0; j < T; ++j) {
          if (cfg_.attention == AttentionMode::Causal && j > i) continue;
          double dot = 0.0;
          for (int c = 0; c < dh; ++c)
            dot += qkv[static_cast<std::size_t>(i)][static_cast<std::size_t>(h * dh + c)] *
                   qkv[static_cast<std::size_t>(j)][static_cast<std::size_t>(d + h * dh + c)];
          s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (auto& v : s) z += (v = std::exp(v - mx));
        for (int j = 0; j < T; ++j)
          for (int c = 0; c < dh; ++c)
            y[static_cast<std::size_t>(i)][static_cast<std::size_t>(h * dh + c)] +=
                s[static_cast<std::size_t>(j)] / z * qkv[static_cast<std::size_t>(j)][static_cast<std::size_t>(2 * d + h * dh + c)];
      }
    Mat out = x;
    for (int t = 0; t < T; ++t) {
      auto& r = out[static_cast<std::size_t>(t)];
      const auto a = linear(y[static_cast<std::size_t>(t)], p + "attn.proj", d);
      for (int c = 0; c < d; ++c) r[static_cast<std::size_t>(c)] += a[static_cast<std::size_t>(c)];
      auto m = linear(layer_norm(r, p + "ln2"), p + "mlp.fc", ff);
      for (auto& v : m) v = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
      const auto o = linear(m, p + "mlp.proj", d);
      for (int c = 0; c < d; ++c) r[static_cast<std::size_t>(c)] += o[static_cast<std::size_t>(c)];
    }
    return out;
  }

  ModelConfig cfg_;
  Weights w_;
};

struct ModelGradCheck {
  double max_rel_error = 0.0;  // worst parameter, normwise as in check_gradients
  std::string worst_leaf;
  double loss_gap = 0.0;       // |library loss - reference loss|
  std::size_t entries = 0;
};

/// Library backward() against central differences of the reference loss.
inline ModelGradCheck check_model_gradients(const Model& model, const std::vector<TokenId>& ids, int B, int T,
                                            const std::vector<std::int32_t>& targets, float normalizer,
                                            double h = 1e-3) {
  Model& m = const_cast<Model&>(model);
  for (auto& p : m.parameters()) p.tensor.zero_grad();
  Tensor loss = ops::cross_entropy(model.forward(ids, B, T).logits, targets, {}, normalizer);
  ModelGradCheck out;
  ReferenceModel ref(model);
  out.loss_gap = std::abs(loss.item() - ref.loss(ids, B, T, targets, normalizer));
  loss.backward();
  for (auto& p : m.parameters()) {
    auto& w = ref.weights().at(p.name);
    const auto g = p.tensor.grad_values();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double plus = ref.loss(ids, B, T, targets, normalizer);
      w[i] = saved - h;
      const double minus = ref.loss(ids, B, T, targets, normalizer);
      w[i] = saved;
      const double numeric = (plus - minus) / (2 * h);
      const double a = g.empty() ? 0.0 : g[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++out.entries;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_leaf = p.name;
    }
  }
  return out;
}

}  // namespace relsem::testing
