#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relsem/config.hpp"
#include "relsem/inference.hpp"
#include "relsem/probe.hpp"

namespace relsem {

inline constexpr std::string_view kToolVersion = "relsem 0.1.0";

// Layout of runs/<name>/:
//   config.txt               resolved configuration written by gen-data
//   manifest.json            config, seeds and content hashes per stage
//   timings.json             wall-clock seconds per stage (kept out of the manifest)
//   data/                    pools, graphs, vocab, corpus, sft pairs, suites
//   model/<stage>.ckpt       pretrain, sft, diffusion
//   trace/<stage>.csv        loss and accuracy traces
//   reports/, probe/, sweep/ evaluation outputs
std::filesystem::path run_path(const ExperimentConfig& cfg);

/// Resolves a configuration for an existing or new run: defaults, profile,
/// runs/<name>/config.txt if present, `config_file`, environment, flags.
ExperimentConfig load_run_config(const ConfigMap& flags, const std::optional<std::filesystem::path>& config_file,
                                 bool use_env = true);

/// Applies cfg.threads to OpenMP (0 leaves the default).
void apply_threads(const ExperimentConfig& cfg);

struct GenDataSummary {
  std::size_t documents = 0;
  std::size_t sft_pairs = 0;
  std::size_t queries = 0;
  std::size_t vocab_size = 0;
};
GenDataSummary gen_data(const ExperimentConfig& cfg);

enum class Stage { Pretrain, Sft, Diffusion };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view text);

/// Trains and writes model/<stage>.ckpt plus trace/<stage>.csv. With `resume`
/// set, continues from model/<stage>.step.ckpt when it exists.
TrainState run_training(const ExperimentConfig& cfg, Stage stage, bool resume = false,
                        const std::function<void(const TraceRow&)>& progress = {});

/// Scores the stage's checkpoint on the run's suite (causal stages) or on the
/// cloze and completion items (diffusion); `direction` restricts items.
EvalReport run_eval(const ExperimentConfig& cfg, Stage stage, std::optional<Direction> direction = std::nullopt);

/// Logit-lens probe over the suite items of `category`.
std::vector<LayerProbeRecord> run_probe(const ExperimentConfig& cfg, Stage stage, Category category);

/// Sweep over one axis: one child run per value under runs/<name>/sweep/,
/// each through gen-data, pretrain, sft and eval, then `report`.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis, const std::vector<std::string>& values,
                      const std::function<void(const std::string&)>& log = {});

/// Collects reports/eval_<stage>.json from `runs` and writes sweep CSV/SVG
/// into the run directory of `cfg`.
SweepResult run_report(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& runs, Stage stage);

}  // namespace relsem
