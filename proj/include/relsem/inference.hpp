#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "relsem/evalgen.hpp"
#include "relsem/model.hpp"
#include "relsem/rng.hpp"
#include "relsem/tokenizer.hpp"

namespace relsem {

enum class Strategy { Greedy, TopK };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct GenConfig {
  Strategy strategy = Strategy::TopK;
  float temperature = 0.8f;
  int top_k = 100;
  int max_new_tokens = 16;
  std::vector<std::string> stop_tokens = {"<eos>", ".", "?"};

  void validate() const;
};

/// Softmax distribution over the next token after `ids`.
std::vector<float> next_token_probs(const Model& model, std::span<const TokenId> ids);

/// Index of the largest value; ties go to the lower index.
TokenId argmax(std::span<const float> logits);

/// Samples from the top_k largest logits at `temperature` (ties by lower id).
TokenId sample_top_k(std::span<const float> logits, int top_k, float temperature, Rng& rng);

/// Autoregressive decoding. The returned ids exclude the prompt and the stop
/// token that ended generation.
std::vector<TokenId> generate_ar(const Model& model, const Vocab& vocab, std::span<const TokenId> prompt,
                                 const GenConfig& gen, Rng& rng);

struct DiffusionDecodeConfig {
  int block_size = 4;
  int refinements = 1;  // prediction rounds per block

  void validate() const;
};

/// Fills `answer_length` MASK slots between `prefix` and `suffix`, block by
/// block from the left. Each round predicts every masked slot of the block
/// and commits the argmax; after round r of R the floor(len * (R - r) / R)
/// least confident slots of the block are masked again.
std::vector<TokenId> generate_diffusion(const Model& model, std::span<const TokenId> prefix, int answer_length,
                                        std::span<const TokenId> suffix, const DiffusionDecodeConfig& cfg);

/// Trim, collapse inner whitespace, strip trailing punctuation, lowercase.
std::string normalize_answer(std::string_view text);

struct Failure {
  std::string prompt;
  std::string gold;
  std::string output;
};

struct GroupResult {
  std::size_t correct = 0;
  std::size_t count = 0;
  std::vector<Failure> failures;  // bounded sample

  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

using ReportKey = std::tuple<Category, Direction, QueryMode>;

struct EvalReport {
  std::map<ReportKey, GroupResult> groups;

  /// Accuracy of a group; throws ConfigError when the group is absent.
  double accuracy(Category c, Direction d) const;
  bool has(Category c, Direction d) const;
  /// "category/direction" -> accuracy, the form used in training traces.
  std::map<std::string, double> metrics() const;
};

struct ScoreConfig {
  GenConfig gen;
  DiffusionDecodeConfig diffusion;
  std::uint64_t seed = 0;  // TopK sampling streams, keyed per item
  std::size_t max_failures = 5;
};

/// The token ids a query is decoded from: BOS + prompt, with Qa items wrapped
/// as "Q: {prompt} A:".
std::vector<TokenId> query_prompt_ids(const QueryItem& item, const Vocab& vocab);

/// Decodes one item: autoregressively for causal models, by block diffusion
/// (answer length = gold token length) for bidirectional ones.
std::string answer_query(const Model& model, const Vocab& vocab, const QueryItem& item, const ScoreConfig& cfg,
                         std::uint64_t item_index);

EvalReport score_items(const Model& model, const Vocab& vocab, std::span<const QueryItem> items,
                       const ScoreConfig& cfg);

void write_report_json(const EvalReport& report, std::ostream& out);
EvalReport read_report_json(std::istream& in);
/// category,direction,mode,correct,count,accuracy
void write_report_csv(const EvalReport& report, std::ostream& out);

/// One finished run of a sweep: its resolved axes and its report.
struct SweepRun {
  std::map<std::string, std::string> axes;
  EvalReport report;
};

struct SweepResult {
  std::string axis;
  std::string csv;                          // axis,value,category,direction,mode,accuracy,count
  std::map<std::string, std::string> svgs;  // chart name -> SVG document
  /// Per ICL completion series, the first axis value where accuracy reaches 0.5.
  std::map<std::string, std::string> transitions;
};

/// Throws AxisMismatch unless the runs differ on exactly one axis.
SweepResult sweep_report(const std::vector<SweepRun>& runs);

}  // namespace relsem
