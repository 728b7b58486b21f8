#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relsem/optim.hpp"
#include "relsem/tensor.hpp"
#include "relsem/tokenizer.hpp"

namespace relsem {

enum class AttentionMode { Causal, Bidirectional };
std::string_view to_string(AttentionMode m);
AttentionMode parse_attention_mode(std::string_view text);

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 0;  // 0 means 4 * d_model
  int vocab_size = 0;
  int max_context = 128;
  AttentionMode attention = AttentionMode::Causal;
  bool tie_embeddings = true;

  int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  /// Canonical "key=value" lines; the config hash is taken over this text.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
  std::uint64_t hash() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count of a GPT-2-style model with learned positions.
std::int64_t expected_parameter_count(const ModelConfig& config);

struct ForwardOptions {
  bool taps = false;  // return the embedding output and every block output
  /// Per-position segment ids ([B*T]); attention never crosses segments.
  std::span<const std::int32_t> segments = {};
  /// Per-position position ids ([B*T]); empty means t for position (b, t).
  std::span<const std::int32_t> positions = {};
  /// Flat rows (b*T + t) to produce logits for; empty means all positions.
  std::span<const std::int64_t> logit_rows = {};
};

struct ForwardResult {
  Tensor logits;             // [B, T, V], or [R, V] when logit_rows is set
  std::vector<Tensor> taps;  // L+1 tensors of [B, T, d] when requested
};

/// GPT-2-style pre-norm decoder with learned absolute positions and an LM head
/// tied to the token embedding.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  /// Parameter by name; throws FormatError if absent.
  const Tensor& param(std::string_view name) const;
  std::int64_t parameter_count() const;

  /// ids is [B*T] row-major. Throws ContextOverflow if T exceeds max_context.
  ForwardResult forward(std::span<const TokenId> ids, int B, int T, const ForwardOptions& options = {}) const;

  /// Final layer norm followed by the LM head; hidden is [..., d].
  Tensor decode(const Tensor& hidden) const;

 private:
  Tensor block(const Tensor& x, int layer, std::span<const std::uint8_t> mask, int B) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
  struct LayerIndex {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b, ln2_g, ln2_b, fc_w, fc_b, out_w, out_b;
  };
  std::size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0;
  std::optional<std::size_t> head_;
  std::vector<LayerIndex> layers_;
};

}  // namespace relsem
