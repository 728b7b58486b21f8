#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "relsem/evalgen.hpp"
#include "relsem/model.hpp"
#include "relsem/tokenizer.hpp"

namespace relsem {

struct ProbePrompt {
  std::vector<TokenId> ids;
  TokenId gold = 0;  // first token of the correct answer
};

/// Per-prompt lens readout at one layer.
struct LensReadout {
  double logit = 0.0;
  double prob = 0.0;
  std::int64_t rank = 1;  // 1-based; ties go to the lower token id
};

struct LayerProbeRecord {
  int layer = 0;  // 0 = embedding output, L = last block
  double mean_logit = 0.0;
  double mean_prob = 0.0;
  double mean_rank = 0.0;
  std::size_t n_prompts = 0;
};

/// Gold-token logit, probability and rank of one logit row.
LensReadout read_lens(std::span<const float> logits, TokenId gold);

/// Readouts of one prompt at every layer (L + 1 entries).
std::vector<LensReadout> probe_prompt(const Model& model, const ProbePrompt& prompt);

/// Decodes each layer's hidden state at the last prompt position through the
/// final norm and the tied head, averaged over prompts. Throws EmptyPromptSet.
std::vector<LayerProbeRecord> probe_layers(const Model& model, std::span<const ProbePrompt> prompts);

/// Prompts (prompt ids, first gold token) for a set of query items.
std::vector<ProbePrompt> probe_prompts(std::span<const QueryItem> items, const Vocab& vocab);

/// layer,metric,value,n_prompts,category
void write_probe_csv(const std::vector<LayerProbeRecord>& records, const std::string& category, std::ostream& out);
struct ProbeCsvRow {
  int layer = 0;
  std::string metric;
  double value = 0.0;
  std::size_t n_prompts = 0;
  std::string category;
};
std::vector<ProbeCsvRow> read_probe_csv(std::istream& in);
/// Three panels (logit, probability, rank on a log scale) against layer, one series per category.
std::string probe_svg(const std::vector<ProbeCsvRow>& rows);

}  // namespace relsem
