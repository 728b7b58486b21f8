#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relsem/model.hpp"
#include "relsem/optim.hpp"
#include "relsem/rng.hpp"
#include "relsem/tokenizer.hpp"
#include "relsem/verbalizer.hpp"

namespace relsem {

enum class Objective { Pretrain, Sft, Diffusion };
std::string_view to_string(Objective o);
Objective parse_objective(std::string_view text);

struct TrainConfig {
  Objective objective = Objective::Pretrain;
  int context = 128;                          // row length T
  std::int64_t tokens_per_iteration = 491520;  // rows per step = tokens_per_iteration / context
  int micro_batch_rows = 16;                  // rows per forward/backward pass
  float max_lr = 6e-4f;
  float min_lr = 6e-5f;
  std::int64_t warmup = 500;
  bool constant_lr = false;
  float weight_decay = 0.1f;
  float grad_clip = 1.0f;
  int epochs = 1;
  std::int64_t max_iterations = 0;  // overrides epochs when > 0
  std::uint64_t seed = 0;
  float t_min = 0.01f;
  bool document_mask = false;  // pretraining: block attention across packed documents
  std::int64_t checkpoint_every = 0;
  int divergence_window = 100;
  float divergence_factor = 2.0f;

  std::int64_t rows_per_iteration() const;
  void validate() const;
};

/// One optimizer step's worth of rows. Targets are aligned with inputs
/// (already shifted for next-token objectives); -1 marks an ignored position.
struct Batch {
  int rows = 0;
  int T = 0;
  std::vector<TokenId> inputs;
  std::vector<std::int32_t> targets;
  std::vector<float> weights;
  std::vector<std::int32_t> segments;   // empty: attention may cross documents
  std::vector<std::int32_t> positions;  // empty: position = column index
  float normalizer = 1.0f;               // loss = sum(w * CE) / normalizer
};

/// Deterministic batch stream: batch(epoch, index) depends only on the seed,
/// the epoch and the index, which is what makes resume exact.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::int64_t iterations_per_epoch() const = 0;
  virtual Batch batch(int epoch, std::int64_t index) const = 0;
};

/// [BOS doc EOS] SEP ... stream, reshuffled per epoch, chunked to rows of T.
class PretrainBatches : public BatchSource {
 public:
  PretrainBatches(const Corpus& corpus, const Vocab& vocab, const TrainConfig& config);
  std::int64_t iterations_per_epoch() const override;
  Batch batch(int epoch, std::int64_t index) const override;
  std::int64_t tokens_per_epoch() const;

 private:
  std::vector<std::int32_t> epoch_stream(int epoch) const;

  std::vector<std::vector<TokenId>> docs_;
  TrainConfig config_;
  mutable int cached_epoch_ = -1;
  mutable std::vector<std::int32_t> cached_stream_;
};

/// Tokens and per-token loss mask of one SFT example: BOS "Q: q A: a" EOS,
/// with the answer tokens and EOS marked.
struct SftExample {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> answer_mask;
};
SftExample encode_sft(const SftPair& pair, const Vocab& vocab);
/// The prompt a QA query is decoded from: "Q: {question} A:".
std::string qa_prompt(std::string_view question);

/// Whole examples packed into rows (never split), one segment per example,
/// positions restarting at each example. Packing is fixed at construction;
/// each epoch visits the rows in a fresh order.
class SftBatches : public BatchSource {
 public:
  SftBatches(const std::vector<SftPair>& pairs, const Vocab& vocab, const TrainConfig& config);
  std::int64_t iterations_per_epoch() const override;
  Batch batch(int epoch, std::int64_t index) const override;

 private:
  std::vector<std::vector<int>> epoch_rows(int epoch) const;

  std::vector<SftExample> examples_;
  TrainConfig config_;
  std::vector<std::vector<int>> packed_;
  mutable int cached_epoch_ = -1;
  mutable std::vector<std::vector<int>> cached_rows_;
};

/// Draws t for one sequence and masks it. Position p is eligible when
/// eligible[p] is set; the loss weight is 1/t on masked positions, 0 elsewhere.
struct DiffusionMaskDraw {
  float t = 1.0f;
  std::vector<std::uint8_t> mask;
};
DiffusionMaskDraw draw_diffusion_mask(std::span<const std::uint8_t> eligible, float t_min, Rng& rng);
/// Same with a fixed t.
DiffusionMaskDraw draw_diffusion_mask_at(std::span<const std::uint8_t> eligible, float t, Rng& rng);

/// Diffusion documents (BOS doc EOS) packed into rows like SFT; each
/// sequence is masked independently. Targets are the clean tokens at the same
/// position; the normalizer counts every maskable position.
class DiffusionBatches : public BatchSource {
 public:
  DiffusionBatches(const DiffusionCorpus& corpus, const Vocab& vocab, const TrainConfig& config);
  std::int64_t iterations_per_epoch() const override;
  Batch batch(int epoch, std::int64_t index) const override;

 private:
  std::vector<std::vector<int>> epoch_rows(int epoch) const;

  std::vector<std::vector<TokenId>> seqs_;
  TrainConfig config_;
  std::vector<std::vector<int>> packed_;
  mutable int cached_epoch_ = -1;
  mutable std::vector<std::vector<int>> cached_rows_;
};

/// Loss of `batch` under `model`; with `backward` set, gradients are
/// accumulated into the parameters, processing micro_batch_rows at a time.
double batch_loss(const Model& model, const Batch& batch, int micro_batch_rows, bool backward);

struct TraceRow {
  std::int64_t iteration = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::map<std::string, double> metrics;  // filled at epoch ends by the eval hook
};

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out);

struct TrainHooks {
  /// Called after the last iteration of each epoch; returned metrics go into the trace.
  std::function<std::map<std::string, double>(int epoch, const Model&)> on_epoch_end;
  std::function<void(std::int64_t iteration, const Model&, const AdamW&)> on_checkpoint;
  std::function<void(const TraceRow&)> on_iteration;
};

struct TrainState {
  std::int64_t iteration = 0;  // completed optimizer steps
  std::vector<TraceRow> trace;
};

/// Runs optimizer steps from state.iteration up to the configured total.
/// Throws DivergenceDetected when the loss stays above divergence_factor x
/// the first loss of this call for divergence_window consecutive steps.
void train(Model& model, AdamW& optimizer, const BatchSource& batches, const TrainConfig& config, TrainState& state,
           const TrainHooks& hooks = {});

std::int64_t total_iterations(const TrainConfig& config, const BatchSource& batches);
LrSchedule make_schedule(const TrainConfig& config, std::int64_t total);

}  // namespace relsem
