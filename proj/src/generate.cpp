#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "relsem/error.hpp"
#include "relsem/inference.hpp"
#include "relsem/tensor.hpp"

namespace relsem {

std::string_view to_string(Strategy s) { return s == Strategy::Greedy ? "greedy" : "topk"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "greedy") return Strategy::Greedy;
  if (text == "topk") return Strategy::TopK;
  throw ConfigError("unknown decoding strategy '" + std::string(text) + "'");
}

void GenConfig::validate() const {
  if (strategy == Strategy::TopK && !(temperature > 0.0f)) throw ConfigError("temperature must be > 0 for top-k");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

void DiffusionDecodeConfig::validate() const {
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  if (refinements < 1) throw ConfigError("refinements must be >= 1");
}

namespace {

std::vector<float> softmax(std::span<const float> logits) {
  const float mx = *std::max_element(logits.begin(), logits.end());
  std::vector<float> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v = static_cast<float>(v / sum);
  return p;
}

// Logits at the last position of a single sequence.
std::vector<float> last_logits(const Model& model, std::span<const TokenId> ids) {
  NoGradGuard guard;
  const std::int64_t row = static_cast<std::int64_t>(ids.size()) - 1;
  ForwardOptions opt;
  opt.logit_rows = std::span(&row, 1);
  const auto out = model.forward(ids, 1, static_cast<int>(ids.size()), opt);
  const auto v = out.logits.values();
  return {v.begin(), v.end()};
}

}  // namespace

std::vector<float> next_token_probs(const Model& model, std::span<const TokenId> ids) {
  if (ids.empty()) throw ShapeMismatch("next_token_probs: empty prompt");
  return softmax(last_logits(model, ids));
}

TokenId argmax(std::span<const float> logits) {
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

TokenId sample_top_k(std::span<const float> logits, int top_k, float temperature, Rng& rng) {
  const auto V = logits.size();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(top_k), V);
  std::vector<TokenId> idx(V);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](TokenId a, TokenId b) {
    return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
  });
  if (k == 1) return idx[0];
  std::vector<double> w(k);
  const double top = logits[idx[0]];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((logits[idx[i]] - top) / temperature);
    sum += w[i];
  }
  double u = rng.uniform01() * sum;
  for (std::size_t i = 0; i < k; ++i) {
    u -= w[i];
    if (u < 0.0) return idx[i];
  }
  return idx[k - 1];
}

std::vector<TokenId> generate_ar(const Model& model, const Vocab& vocab, std::span<const TokenId> prompt,
                                 const GenConfig& gen, Rng& rng) {
  gen.validate();
  if (model.config().attention != AttentionMode::Causal)
    throw ConfigError("autoregressive generation needs a causal model");
  std::vector<TokenId> stops;
  for (const auto& s : gen.stop_tokens) {
    const auto id = vocab.id(s);
    if (id != Vocab::kUnk) stops.push_back(id);
  }
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  for (int step = 0; step < gen.max_new_tokens; ++step) {
    const auto logits = last_logits(model, seq);
    const TokenId next = gen.strategy == Strategy::Greedy ? argmax(logits)
                                                          : sample_top_k(logits, gen.top_k, gen.temperature, rng);
    if (std::find(stops.begin(), stops.end(), next) != stops.end()) break;
    out.push_back(next);
    seq.push_back(next);
  }
  return out;
}

std::vector<TokenId> generate_diffusion(const Model& model, std::span<const TokenId> prefix, int answer_length,
                                        std::span<const TokenId> suffix, const DiffusionDecodeConfig& cfg) {
  cfg.validate();
  if (answer_length < 0) throw ConfigError("answer_length must be >= 0");
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  const auto start = seq.size();
  seq.insert(seq.end(), static_cast<std::size_t>(answer_length), Vocab::kMask);
  seq.insert(seq.end(), suffix.begin(), suffix.end());
  const int T = static_cast<int>(seq.size());
  std::vector<float> confidence(seq.size(), 0.0f);

  NoGradGuard guard;
  const int R = cfg.refinements;
  for (int b0 = 0; b0 < answer_length; b0 += cfg.block_size) {
    const int len = std::min(cfg.block_size, answer_length - b0);
    for (int r = 1; r <= R; ++r) {
      std::vector<std::int64_t> rows;
      for (int i = 0; i < len; ++i) {
        const auto p = start + static_cast<std::size_t>(b0 + i);
        if (seq[p] == Vocab::kMask) rows.push_back(static_cast<std::int64_t>(p));
      }
      if (!rows.empty()) {
        ForwardOptions opt;
        opt.logit_rows = rows;
        const auto out = model.forward(seq, 1, T, opt);
        const int V = out.logits.dim(-1);
        for (std::size_t j = 0; j < rows.size(); ++j) {
          const auto row = std::span(out.logits.data() + j * static_cast<std::size_t>(V), static_cast<std::size_t>(V));
          // MASK is never a valid answer token.
          std::vector<float> logits(row.begin(), row.end());
          logits[Vocab::kMask] = -INFINITY;
          const auto probs = softmax(logits);
          const TokenId best = argmax(logits);
          seq[static_cast<std::size_t>(rows[j])] = best;
          confidence[static_cast<std::size_t>(rows[j])] = probs[static_cast<std::size_t>(best)];
        }
      }
      const int remask = len * (R - r) / R;
      if (remask == 0) continue;
      std::vector<std::size_t> order(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) order[static_cast<std::size_t>(i)] = start + static_cast<std::size_t>(b0 + i);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });
      for (int i = 0; i < remask; ++i) seq[order[static_cast<std::size_t>(i)]] = Vocab::kMask;
    }
  }
  return {seq.begin() + static_cast<std::ptrdiff_t>(start),
          seq.begin() + static_cast<std::ptrdiff_t>(start) + answer_length};
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && (std::ispunct(static_cast<unsigned char>(out.back())) || out.back() == ' ')) out.pop_back();
  return out;
}

}  // namespace relsem
