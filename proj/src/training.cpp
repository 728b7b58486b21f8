#include "relsem/training.hpp"

#include <algorithm>
#include <cmath>
#ifdef __GLIBC__
#include <malloc.h>
#endif
#include <ostream>
#include <set>

#include "relsem/error.hpp"
#include "relsem/kernels.hpp"
#include "relsem/ops.hpp"
#include "relsem/rng.hpp"

namespace relsem {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::Pretrain: return "pretrain";
    case Objective::Sft: return "sft";
    case Objective::Diffusion: return "diffusion";
  }
  return "pretrain";
}

Objective parse_objective(std::string_view text) {
  if (text == "pretrain") return Objective::Pretrain;
  if (text == "sft") return Objective::Sft;
  if (text == "diffusion") return Objective::Diffusion;
  throw ConfigError("unknown objective '" + std::string(text) + "'");
}

std::int64_t TrainConfig::rows_per_iteration() const { return std::max<std::int64_t>(1, tokens_per_iteration / context); }

void TrainConfig::validate() const {
  if (context < 2) throw ConfigError("context must be at least 2");
  if (tokens_per_iteration < context) throw ConfigError("tokens_per_iteration must be at least the context length");
  if (micro_batch_rows < 1) throw ConfigError("micro_batch_rows must be positive");
  if (!(max_lr > 0.0f) || min_lr < 0.0f || min_lr > max_lr) throw ConfigError("need 0 <= min_lr <= max_lr, max_lr > 0");
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  if (epochs < 1 && max_iterations <= 0) throw ConfigError("epochs must be positive");
  if (!(t_min > 0.0f) || t_min > 1.0f) throw ConfigError("t_min must be in (0, 1]");
  if (divergence_window < 1 || !(divergence_factor > 1.0f)) throw ConfigError("bad divergence settings");
}

namespace {

constexpr std::uint64_t kShuffleTag = 0x5F0C;
constexpr std::uint64_t kMaskTag = 0xD1F;
constexpr std::uint64_t kPackEpoch = ~0ULL;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

Batch empty_batch(int rows, int T) {
  Batch b;
  b.rows = rows;
  b.T = T;
  const auto n = static_cast<std::size_t>(rows) * T;
  b.inputs.assign(n, Vocab::kPad);
  b.targets.assign(n, -1);
  b.weights.assign(n, 0.0f);
  return b;
}

// Greedy packing of whole sequences into rows of at most T tokens.
std::vector<std::vector<int>> pack_rows(const std::vector<int>& order, const std::vector<std::size_t>& lengths, int T) {
  std::vector<std::vector<int>> rows;
  std::size_t used = static_cast<std::size_t>(T);
  for (int i : order) {
    const auto len = lengths[static_cast<std::size_t>(i)];
    if (len > static_cast<std::size_t>(T))
      throw ContextOverflow("sequence of " + std::to_string(len) + " tokens exceeds context " + std::to_string(T));
    if (used + len > static_cast<std::size_t>(T)) {
      rows.emplace_back();
      used = 0;
    }
    rows.back().push_back(i);
    used += len;
  }
  return rows;
}

std::vector<int> shuffled_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, {kShuffleTag, epoch}));
  rng.shuffle(order);
  return order;
}

std::vector<std::vector<int>> permuted_rows(const std::vector<std::vector<int>>& rows, std::uint64_t seed, int epoch) {
  std::vector<std::vector<int>> out;
  out.reserve(rows.size());
  for (int i : shuffled_order(rows.size(), seed, static_cast<std::uint64_t>(epoch))) out.push_back(rows[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

// ---- pretraining ----

PretrainBatches::PretrainBatches(const Corpus& corpus, const Vocab& vocab, const TrainConfig& config)
    : config_(config) {
  config_.validate();
  docs_.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) docs_.push_back(vocab.encode(d.text));
  if (docs_.empty()) throw ConfigError("pretraining corpus is empty");
}

std::int64_t PretrainBatches::tokens_per_epoch() const {
  std::int64_t n = 0;
  for (const auto& d : docs_) n += static_cast<std::int64_t>(d.size()) + 3;
  return n;
}

std::vector<std::int32_t> PretrainBatches::epoch_stream(int epoch) const {
  if (cached_epoch_ == epoch) return cached_stream_;
  std::vector<std::int32_t> stream;
  stream.reserve(static_cast<std::size_t>(tokens_per_epoch()));
  for (int i : shuffled_order(docs_.size(), config_.seed, static_cast<std::uint64_t>(epoch))) {
    stream.push_back(Vocab::kBos);
    const auto& d = docs_[static_cast<std::size_t>(i)];
    stream.insert(stream.end(), d.begin(), d.end());
    stream.push_back(Vocab::kEos);
    stream.push_back(Vocab::kSep);
  }
  cached_epoch_ = epoch;
  cached_stream_ = stream;
  return stream;
}

std::int64_t PretrainBatches::iterations_per_epoch() const {
  const auto rows = ceil_div(tokens_per_epoch() - 1, config_.context);
  return ceil_div(rows, config_.rows_per_iteration());
}

Batch PretrainBatches::batch(int epoch, std::int64_t index) const {
  const auto stream = epoch_stream(epoch);
  const int T = config_.context;
  const std::int64_t total_rows = ceil_div(static_cast<std::int64_t>(stream.size()) - 1, T);
  const std::int64_t first = index * config_.rows_per_iteration();
  const std::int64_t last = std::min(total_rows, first + config_.rows_per_iteration());
  if (first >= last) throw ConfigError("batch index " + std::to_string(index) + " past the end of the epoch");

  Batch b = empty_batch(static_cast<int>(last - first), T);
  if (config_.document_mask) {
    b.segments.assign(b.inputs.size(), -1);
    b.positions.assign(b.inputs.size(), 0);
  }
  double count = 0.0;
  for (std::int64_t r = first; r < last; ++r) {
    const auto row = static_cast<std::size_t>(r - first) * T;
    std::int32_t segment = 0;
    std::int32_t pos = 0;
    for (int t = 0; t < T; ++t) {
      const std::int64_t s = r * T + t;
      if (s + 1 >= static_cast<std::int64_t>(stream.size())) break;
      const auto tok = stream[static_cast<std::size_t>(s)];
      b.inputs[row + t] = tok;
      b.targets[row + t] = stream[static_cast<std::size_t>(s + 1)];
      b.weights[row + t] = 1.0f;
      count += 1.0;
      if (config_.document_mask) {
        if (tok == Vocab::kBos && t > 0) {
          ++segment;
          pos = 0;
        }
        b.segments[row + t] = segment;
        b.positions[row + t] = pos++;
      }
    }
  }
  b.normalizer = static_cast<float>(std::max(1.0, count));
  return b;
}

// ---- supervised fine-tuning ----

std::string qa_prompt(std::string_view question) { return "Q: " + std::string(question) + " A:"; }

SftExample encode_sft(const SftPair& pair, const Vocab& vocab) {
  SftExample ex;
  ex.tokens.push_back(Vocab::kBos);
  const auto prompt = vocab.encode(qa_prompt(pair.question));
  ex.tokens.insert(ex.tokens.end(), prompt.begin(), prompt.end());
  const auto answer = vocab.encode(pair.answer);
  ex.tokens.insert(ex.tokens.end(), answer.begin(), answer.end());
  ex.tokens.push_back(Vocab::kEos);
  ex.answer_mask.assign(ex.tokens.size(), 0);
  std::fill(ex.answer_mask.begin() + static_cast<std::ptrdiff_t>(1 + prompt.size()), ex.answer_mask.end(), 1);
  return ex;
}

SftBatches::SftBatches(const std::vector<SftPair>& pairs, const Vocab& vocab, const TrainConfig& config)
    : config_(config) {
  config_.validate();
  if (pairs.empty()) throw ConfigError("SFT corpus is empty");
  examples_.reserve(pairs.size());
  std::vector<std::size_t> lengths;
  for (const auto& p : pairs) {
    examples_.push_back(encode_sft(p, vocab));
    lengths.push_back(examples_.back().tokens.size());
  }
  packed_ = pack_rows(shuffled_order(examples_.size(), config_.seed, kPackEpoch), lengths, config_.context);
}

std::vector<std::vector<int>> SftBatches::epoch_rows(int epoch) const {
  if (cached_epoch_ != epoch) {
    cached_rows_ = permuted_rows(packed_, config_.seed, epoch);
    cached_epoch_ = epoch;
  }
  return cached_rows_;
}

std::int64_t SftBatches::iterations_per_epoch() const {
  return ceil_div(static_cast<std::int64_t>(packed_.size()), config_.rows_per_iteration());
}

Batch SftBatches::batch(int epoch, std::int64_t index) const {
  const auto rows = epoch_rows(epoch);
  const std::int64_t first = index * config_.rows_per_iteration();
  const std::int64_t last = std::min<std::int64_t>(static_cast<std::int64_t>(rows.size()), first + config_.rows_per_iteration());
  if (first >= last) throw ConfigError("batch index " + std::to_string(index) + " past the end of the epoch");
  const int T = config_.context;
  Batch b = empty_batch(static_cast<int>(last - first), T);
  b.segments.assign(b.inputs.size(), -1);
  b.positions.assign(b.inputs.size(), 0);
  double count = 0.0;
  for (std::int64_t r = first; r < last; ++r) {
    std::size_t at = static_cast<std::size_t>(r - first) * T;
    std::int32_t segment = 0;
    for (int i : rows[static_cast<std::size_t>(r)]) {
      const auto& ex = examples_[static_cast<std::size_t>(i)];
      for (std::size_t p = 0; p < ex.tokens.size(); ++p, ++at) {
        b.inputs[at] = ex.tokens[p];
        b.segments[at] = segment;
        b.positions[at] = static_cast<std::int32_t>(p);
        if (p + 1 < ex.tokens.size() && ex.answer_mask[p + 1]) {
          b.targets[at] = ex.tokens[p + 1];
          b.weights[at] = 1.0f;
          count += 1.0;
        }
      }
      ++segment;
    }
  }
  b.normalizer = static_cast<float>(std::max(1.0, count));
  return b;
}

// ---- masked diffusion ----

DiffusionMaskDraw draw_diffusion_mask_at(std::span<const std::uint8_t> eligible, float t, Rng& rng) {
  DiffusionMaskDraw d;
  d.t = t;
  d.mask.assign(eligible.size(), 0);
  for (std::size_t i = 0; i < eligible.size(); ++i)
    if (eligible[i]) d.mask[i] = rng.bernoulli(t) ? 1 : 0;
  return d;
}

DiffusionMaskDraw draw_diffusion_mask(std::span<const std::uint8_t> eligible, float t_min, Rng& rng) {
  const auto t = static_cast<float>(t_min + (1.0 - t_min) * rng.uniform01());
  return draw_diffusion_mask_at(eligible, t, rng);
}

DiffusionBatches::DiffusionBatches(const DiffusionCorpus& corpus, const Vocab& vocab, const TrainConfig& config)
    : config_(config) {
  config_.validate();
  if (corpus.documents.empty()) throw ConfigError("diffusion corpus is empty");
  for (const auto& d : corpus.documents) {
    std::vector<TokenId> s{Vocab::kBos};
    const auto ids = vocab.encode(d.text);
    s.insert(s.end(), ids.begin(), ids.end());
    s.push_back(Vocab::kEos);
    seqs_.push_back(std::move(s));
  }
  std::vector<std::size_t> lengths;
  for (const auto& s : seqs_) lengths.push_back(s.size());
  packed_ = pack_rows(shuffled_order(seqs_.size(), config_.seed, kPackEpoch), lengths, config_.context);
}

std::vector<std::vector<int>> DiffusionBatches::epoch_rows(int epoch) const {
  if (cached_epoch_ != epoch) {
    cached_rows_ = permuted_rows(packed_, config_.seed, epoch);
    cached_epoch_ = epoch;
  }
  return cached_rows_;
}

std::int64_t DiffusionBatches::iterations_per_epoch() const {
  return ceil_div(static_cast<std::int64_t>(packed_.size()), config_.rows_per_iteration());
}

Batch DiffusionBatches::batch(int epoch, std::int64_t index) const {
  const auto rows = epoch_rows(epoch);
  const std::int64_t first = index * config_.rows_per_iteration();
  const std::int64_t last = std::min<std::int64_t>(static_cast<std::int64_t>(rows.size()), first + config_.rows_per_iteration());
  if (first >= last) throw ConfigError("batch index " + std::to_string(index) + " past the end of the epoch");
  const int T = config_.context;
  Batch b = empty_batch(static_cast<int>(last - first), T);
  b.segments.assign(b.inputs.size(), -1);
  b.positions.assign(b.inputs.size(), 0);
  double maskable = 0.0;
  for (std::int64_t r = first; r < last; ++r) {
    std::size_t at = static_cast<std::size_t>(r - first) * T;
    std::int32_t segment = 0;
    for (int i : rows[static_cast<std::size_t>(r)]) {
      const auto& s = seqs_[static_cast<std::size_t>(i)];
      std::vector<std::uint8_t> eligible(s.size(), 1);
      eligible[0] = 0;
      Rng rng(derive_seed(config_.seed, {kMaskTag, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)}));
      const auto draw = draw_diffusion_mask(eligible, config_.t_min, rng);
      for (std::size_t p = 0; p < s.size(); ++p, ++at) {
        b.segments[at] = segment;
        b.positions[at] = static_cast<std::int32_t>(p);
        b.inputs[at] = draw.mask[p] ? Vocab::kMask : s[p];
        if (eligible[p]) maskable += 1.0;
        if (draw.mask[p]) {
          b.targets[at] = s[p];
          b.weights[at] = 1.0f / draw.t;
        }
      }
      ++segment;
    }
  }
  b.normalizer = static_cast<float>(std::max(1.0, maskable));
  return b;
}

// ---- loop ----

double batch_loss(const Model& model, const Batch& batch, int micro_batch_rows, bool backward) {
  const int T = batch.T;
  double total = 0.0;
  for (int r0 = 0; r0 < batch.rows; r0 += micro_batch_rows) {
    const int rows = std::min(micro_batch_rows, batch.rows - r0);
    const auto off = static_cast<std::size_t>(r0) * T;
    const auto n = static_cast<std::size_t>(rows) * T;
    std::vector<std::int64_t> live;
    std::vector<std::int32_t> targets;
    std::vector<float> weights;
    for (std::size_t i = 0; i < n; ++i) {
      if (batch.targets[off + i] < 0 || batch.weights[off + i] == 0.0f) continue;
      live.push_back(static_cast<std::int64_t>(i));
      targets.push_back(batch.targets[off + i]);
      weights.push_back(batch.weights[off + i]);
    }
    if (live.empty()) continue;
    ForwardOptions opt;
    if (!batch.segments.empty()) opt.segments = std::span(batch.segments).subspan(off, n);
    if (!batch.positions.empty()) opt.positions = std::span(batch.positions).subspan(off, n);
    opt.logit_rows = live;
    auto run = [&] {
      auto out = model.forward(std::span(batch.inputs).subspan(off, n), rows, T, opt);
      Tensor loss = ops::cross_entropy(out.logits, targets, weights, batch.normalizer);
      total += loss.item();
      if (backward) loss.backward();
    };
    if (backward) {
      run();
    } else {
      NoGradGuard guard;
      run();
    }
  }
  return total;
}

std::int64_t total_iterations(const TrainConfig& config, const BatchSource& batches) {
  if (config.max_iterations > 0) return config.max_iterations;
  return batches.iterations_per_epoch() * config.epochs;
}

LrSchedule make_schedule(const TrainConfig& config, std::int64_t total) {
  LrSchedule s;
  s.max_lr = config.max_lr;
  s.min_lr = config.min_lr;
  s.warmup = config.warmup;
  s.total_steps = total;
  s.constant = config.constant_lr;
  return s;
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out) {
  std::set<std::string> keys;
  for (const auto& r : trace)
    for (const auto& [k, v] : r.metrics) keys.insert(k);
  out << "iteration,epoch,loss,lr";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.epoch << ',' << r.loss << ',' << r.lr;
    for (const auto& k : keys) {
      out << ',';
      if (auto it = r.metrics.find(k); it != r.metrics.end()) out << it->second;
    }
    out << '\n';
  }
}

void train(Model& model, AdamW& optimizer, const BatchSource& batches, const TrainConfig& config, TrainState& state,
           const TrainHooks& hooks) {
  config.validate();
  kernels::flush_subnormals();
#ifdef __GLIBC__
  // Activation buffers are reallocated every step; keep them on the heap
  // instead of fresh mmap pages that fault in on each zero fill.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  const std::int64_t per_epoch = batches.iterations_per_epoch();
  if (per_epoch < 1) throw ConfigError("training data yields no batches");
  const std::int64_t total = total_iterations(config, batches);
  const LrSchedule schedule = make_schedule(config, total);
  auto& params = model.parameters();

  double reference = -1.0;
  int above = 0;
  for (std::int64_t it = state.iteration; it < total; ++it) {
    const int epoch = static_cast<int>(it / per_epoch);
    const Batch b = batches.batch(epoch, it % per_epoch);
    zero_grads(params);
    const double loss = batch_loss(model, b, config.micro_batch_rows, true);
    if (!std::isfinite(loss))
      throw DivergenceDetected("non-finite loss at iteration " + std::to_string(it + 1));
    if (config.grad_clip > 0.0f) clip_grad_norm(params, config.grad_clip);
    const float lr = schedule.at(it + 1);
    optimizer.step(params, lr);
    state.iteration = it + 1;

    if (reference < 0.0) reference = loss;
    above = loss > config.divergence_factor * reference ? above + 1 : 0;
    if (above >= config.divergence_window)
      throw DivergenceDetected("loss " + std::to_string(loss) + " above " + std::to_string(config.divergence_factor) +
                               "x the initial " + std::to_string(reference) + " for " + std::to_string(above) +
                               " iterations");

    TraceRow row{state.iteration, epoch, loss, lr, {}};
    const bool epoch_end = state.iteration % per_epoch == 0 || state.iteration == total;
    if (epoch_end && hooks.on_epoch_end) row.metrics = hooks.on_epoch_end(epoch, model);
    state.trace.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row);
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0)
      hooks.on_checkpoint(state.iteration, model, optimizer);
  }
  zero_grads(params);
}

}  // namespace relsem
