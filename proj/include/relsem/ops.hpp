#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relsem/rng.hpp"
#include "relsem/tensor.hpp"

// Differentiable operations. Each throws ShapeMismatch (naming both shapes)
// on incompatible inputs.
namespace relsem::ops {

/// a: [..., K] (or [K, M] when ta, 2-D only); b: [K, N] (or [N, K] when tb). Result [..., N].
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

/// Batched: a [G, M, K], b [G, K, N] (last two dims swapped by ta/tb). Result [G, M, N].
Tensor bmm(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

/// Elementwise sum; `b` may also be 1-D matching a's last dimension (row broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

/// Swaps the last two dimensions.
Tensor transpose(const Tensor& a);

/// Gathers rows of weight [V, d] for `ids`; result shape ids_shape + [d].
Tensor embedding(const Tensor& weight, std::span<const std::int32_t> ids, const Shape& ids_shape);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x);

/// x [G, T, S]; mask [Gm, T, S] with G a multiple of Gm (group g uses mask g / (G / Gm)).
/// Positions where mask != 0 are replaced with `value` and receive no gradient.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, int mask_groups, float value);

/// Sum over rows of weight_i * CE(logits_i, target_i), divided by `normalizer`.
/// Rows with target < 0 or weight 0 contribute nothing. Empty weights mean all 1.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const float> weights,
                     float normalizer);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, float p, Rng& rng);

/// [B, T, H*dh] -> [B*H, T, dh] and back.
Tensor split_heads(const Tensor& x, int heads);
Tensor merge_heads(const Tensor& x, int heads);

/// Slice [start, start+len) of the last dimension, and concatenation along it.
Tensor slice_last(const Tensor& x, int start, int len);
Tensor concat_last(const std::vector<Tensor>& parts);

/// Selects rows of a [..., d] tensor viewed as [R, d].
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows);

Tensor sum(const Tensor& x);

}  // namespace relsem::ops
