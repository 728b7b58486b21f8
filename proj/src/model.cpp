#include "relsem/model.hpp"

#include <cmath>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/ops.hpp"
#include "relsem/rng.hpp"

namespace relsem {

std::string_view to_string(AttentionMode m) { return m == AttentionMode::Causal ? "causal" : "bidirectional"; }

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "causal") return AttentionMode::Causal;
  if (text == "bidirectional") return AttentionMode::Bidirectional;
  throw ConfigError("unknown attention mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d_model < 1 || vocab_size < 1 || max_context < 1)
    throw ConfigError("model dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  if (d_ff < 0) throw ConfigError("d_ff must be >= 0");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "n_layers=" << n_layers << '\n'
      << "n_heads=" << n_heads << '\n'
      << "d_model=" << d_model << '\n'
      << "d_ff=" << ff_dim() << '\n'
      << "vocab_size=" << vocab_size << '\n'
      << "max_context=" << max_context << '\n'
      << "attention=" << to_string(attention) << '\n'
      << "tie_embeddings=" << (tie_embeddings ? 1 : 0) << '\n'
      << "norm=pre\n"
      << "positions=learned\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    if (key == "n_layers") c.n_layers = std::stoi(val);
    else if (key == "n_heads") c.n_heads = std::stoi(val);
    else if (key == "d_model") c.d_model = std::stoi(val);
    else if (key == "d_ff") c.d_ff = std::stoi(val);
    else if (key == "vocab_size") c.vocab_size = std::stoi(val);
    else if (key == "max_context") c.max_context = std::stoi(val);
    else if (key == "attention") c.attention = parse_attention_mode(val);
    else if (key == "tie_embeddings") c.tie_embeddings = val == "1";
  }
  c.validate();
  return c;
}

std::uint64_t ModelConfig::hash() const { return hash_string(to_text()); }

std::int64_t expected_parameter_count(const ModelConfig& c) {
  const std::int64_t d = c.d_model;
  const std::int64_t f = c.ff_dim();
  const std::int64_t per_layer = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
  std::int64_t n = static_cast<std::int64_t>(c.vocab_size) * d + static_cast<std::int64_t>(c.max_context) * d +
                   c.n_layers * per_layer + 2 * d;
  if (!c.tie_embeddings) n += static_cast<std::int64_t>(c.vocab_size) * d;
  return n;
}

namespace {
constexpr float kInitStd = 0.02f;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, {0x1417ULL}));
  const int d = config_.d_model;
  const int f = config_.ff_dim();
  auto add = [&](std::string name, Shape shape, float fill, bool normal, bool decay) {
    Tensor t = Tensor::full(std::move(shape), fill, true);
    if (normal)
      for (auto& v : t.storage()) v = static_cast<float>(rng.normal()) * kInitStd;
    params_.push_back({std::move(name), t, decay});
    return params_.size() - 1;
  };
  wte_ = add("wte", {config_.vocab_size, d}, 0.0f, true, true);
  wpe_ = add("wpe", {config_.max_context, d}, 0.0f, true, true);
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    LayerIndex li{};
    li.ln1_g = add(p + "ln1.g", {d}, 1.0f, false, false);
    li.ln1_b = add(p + "ln1.b", {d}, 0.0f, false, false);
    li.qkv_w = add(p + "attn.qkv.w", {d, 3 * d}, 0.0f, true, true);
    li.qkv_b = add(p + "attn.qkv.b", {3 * d}, 0.0f, false, false);
    li.proj_w = add(p + "attn.proj.w", {d, d}, 0.0f, true, true);
    li.proj_b = add(p + "attn.proj.b", {d}, 0.0f, false, false);
    li.ln2_g = add(p + "ln2.g", {d}, 1.0f, false, false);
    li.ln2_b = add(p + "ln2.b", {d}, 0.0f, false, false);
    li.fc_w = add(p + "mlp.fc.w", {d, f}, 0.0f, true, true);
    li.fc_b = add(p + "mlp.fc.b", {f}, 0.0f, false, false);
    li.out_w = add(p + "mlp.proj.w", {f, d}, 0.0f, true, true);
    li.out_b = add(p + "mlp.proj.b", {d}, 0.0f, false, false);
    layers_.push_back(li);
  }
  lnf_g_ = add("lnf.g", {d}, 1.0f, false, false);
  lnf_b_ = add("lnf.b", {d}, 0.0f, false, false);
  if (!config_.tie_embeddings) head_ = add("lm_head", {config_.vocab_size, d}, 0.0f, true, true);
}

const Tensor& Model::param(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw FormatError("model has no parameter '" + std::string(name) + "'");
}

std::int64_t Model::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor Model::block(const Tensor& x, int layer, std::span<const std::uint8_t> mask, int B) const {
  const auto& li = layers_[static_cast<std::size_t>(layer)];
  auto P = [&](std::size_t i) -> const Tensor& { return params_[i].tensor; };
  const int d = config_.d_model;
  const int H = config_.n_heads;

  Tensor h = ops::layer_norm(x, P(li.ln1_g), P(li.ln1_b));
  Tensor qkv = ops::add(ops::matmul(h, P(li.qkv_w)), P(li.qkv_b));
  Tensor q = ops::split_heads(ops::slice_last(qkv, 0, d), H);
  Tensor k = ops::split_heads(ops::slice_last(qkv, d, d), H);
  Tensor v = ops::split_heads(ops::slice_last(qkv, 2 * d, d), H);
  Tensor att = ops::scale(ops::bmm(q, k, false, true), 1.0f / std::sqrt(static_cast<float>(d / H)));
  if (!mask.empty()) att = ops::masked_fill(att, mask, B, -1e9f);
  att = ops::softmax(att);
  Tensor y = ops::merge_heads(ops::bmm(att, v), H);
  y = ops::add(ops::matmul(y, P(li.proj_w)), P(li.proj_b));
  Tensor x1 = ops::add(x, y);

  Tensor h2 = ops::layer_norm(x1, P(li.ln2_g), P(li.ln2_b));
  Tensor m = ops::gelu(ops::add(ops::matmul(h2, P(li.fc_w)), P(li.fc_b)));
  m = ops::add(ops::matmul(m, P(li.out_w)), P(li.out_b));
  return ops::add(x1, m);
}

Tensor Model::decode(const Tensor& hidden) const {
  Tensor h = ops::layer_norm(hidden, params_[lnf_g_].tensor, params_[lnf_b_].tensor);
  const Tensor& head = head_ ? params_[*head_].tensor : params_[wte_].tensor;
  return ops::matmul(h, head, false, true);
}

ForwardResult Model::forward(std::span<const TokenId> ids, int B, int T, const ForwardOptions& options) const {
  if (T > config_.max_context)
    throw ContextOverflow("sequence length " + std::to_string(T) + " exceeds max_context " +
                          std::to_string(config_.max_context));
  if (B < 1 || T < 1 || static_cast<std::int64_t>(ids.size()) != static_cast<std::int64_t>(B) * T)
    throw ShapeMismatch("forward: " + std::to_string(ids.size()) + " ids for batch [" + std::to_string(B) + ", " +
                        std::to_string(T) + "]");
  const bool segmented = !options.segments.empty();
  if (segmented && options.segments.size() != ids.size())
    throw ShapeMismatch("forward: segment ids do not match token ids");

  std::vector<std::uint8_t> mask;
  const bool causal = config_.attention == AttentionMode::Causal;
  if (causal || segmented) {
    mask.assign(static_cast<std::size_t>(B) * T * T, 0);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
          bool blocked = causal && j > i;
          if (segmented) blocked = blocked || options.segments[b * T + i] != options.segments[b * T + j];
          mask[(static_cast<std::size_t>(b) * T + i) * T + j] = blocked;
        }
  }

  std::vector<std::int32_t> positions(ids.size());
  if (!options.positions.empty()) {
    if (options.positions.size() != ids.size()) throw ShapeMismatch("forward: position ids do not match token ids");
    positions.assign(options.positions.begin(), options.positions.end());
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<std::int32_t>(i % T);
  }
  Tensor x = ops::add(ops::embedding(params_[wte_].tensor, ids, {B, T}),
                      ops::embedding(params_[wpe_].tensor, positions, {B, T}));

  ForwardResult result;
  if (options.taps) result.taps.push_back(x);
  for (int l = 0; l < config_.n_layers; ++l) {
    x = block(x, l, mask, B);
    if (options.taps) result.taps.push_back(x);
  }
  result.logits = options.logit_rows.empty() ? decode(x) : decode(ops::gather_rows(x, options.logit_rows));
  return result;
}

}  // namespace relsem
