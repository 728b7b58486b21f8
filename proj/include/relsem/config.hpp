#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relsem/evalgen.hpp"
#include "relsem/inference.hpp"
#include "relsem/model.hpp"
#include "relsem/training.hpp"
#include "relsem/verbalizer.hpp"

namespace relsem {

using ConfigMap = std::map<std::string, std::string>;

/// Parses "key = value" lines. '#' starts a comment; "include = path" pulls in
/// another file (relative to `base_dir`), whose keys later lines may override.
ConfigMap parse_config_text(std::string_view text, const std::filesystem::path& base_dir);
ConfigMap load_config_file(const std::filesystem::path& path);

/// Built-in presets: "desk" and "full".
ConfigMap profile(std::string_view name);

/// Maps the short axis names N, K, E, L to their long keys; other keys pass through.
std::string canonical_key(std::string_view key);

/// Every known key with its default value.
const ConfigMap& default_config();

/// Applies RELSEM_<KEY> environment variables (key upper-cased) for every known key.
void apply_env_overrides(ConfigMap& config);

/// Layering: defaults, then `profile` (if set in any layer), then the file, env, flags.
ConfigMap resolve_layers(const ConfigMap& file, const ConfigMap& flags, bool use_env = true);

struct ExperimentConfig {
  std::string name = "default";
  std::filesystem::path runs_dir = "runs";
  std::string profile;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: OpenMP default

  // Data axes.
  int num_train_samples = 200;  // N
  int num_template = 4;         // K
  int num_training_epochs = 60; // E
  int num_layers = 2;           // L
  int num_eval_graphs = 50;
  int num_icl_graphs = 50;
  DirectionRegime regime = DirectionRegime::OneDirectionalPeople;
  SftDirection sft_direction = SftDirection::Both;
  IclYield icl;

  ModelConfig model;
  TrainConfig pretrain;
  TrainConfig sft;
  TrainConfig diffusion;
  ScoreConfig score;
  bool eval_each_epoch = false;

  /// Canonical key=value text over every known key, sorted by key.
  std::string to_text() const;
  ConfigMap to_map() const;
  /// The subset of keys that define a sweep axis (data, model and schedule settings).
  std::map<std::string, std::string> axes() const;
};

/// Typed view of a fully layered map. Throws ConfigError on unknown keys or bad values.
ExperimentConfig make_experiment_config(const ConfigMap& config);

}  // namespace relsem
