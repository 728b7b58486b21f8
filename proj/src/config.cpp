#include "relsem/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/hashing.hpp"

namespace relsem {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

ConfigMap parse_impl(std::string_view text, const std::filesystem::path& base_dir, int depth) {
  if (depth > 16) throw ConfigError("config include depth exceeds 16");
  ConfigMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (key == "include") {
      const auto path = base_dir / value;
      for (auto& [k, v] : parse_impl(read_file(path), path.parent_path(), depth + 1)) out[k] = v;
    } else {
      out[canonical_key(key)] = value;
    }
  }
  return out;
}

int to_int(const ConfigMap& m, const std::string& key) {
  const auto& v = m.at(key);
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::int64_t to_i64(const ConfigMap& m, const std::string& key) {
  const auto& v = m.at(key);
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

float to_float(const ConfigMap& m, const std::string& key) {
  const auto& v = m.at(key);
  try {
    std::size_t used = 0;
    const float x = std::stof(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const ConfigMap& m, const std::string& key) {
  const auto& v = m.at(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
std::string str(T v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// Keys that say where or how a run executes rather than what it computes.
const std::set<std::string> kNonAxisKeys = {"name", "runs_dir", "profile", "threads"};

}  // namespace

std::string canonical_key(std::string_view key) {
  if (key == "N") return "num_train_samples";
  if (key == "K") return "num_template";
  if (key == "E") return "num_training_epochs";
  if (key == "L") return "num_layers";
  std::string k(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

ConfigMap parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  return parse_impl(text, base_dir, 0);
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  return parse_impl(read_file(path), path.parent_path(), 0);
}

const ConfigMap& default_config() {
  static const ConfigMap m = {
      {"name", "default"},
      {"runs_dir", "runs"},
      {"profile", ""},
      {"seed", "0"},
      {"threads", "0"},
      {"num_train_samples", "200"},
      {"num_template", "4"},
      {"num_training_epochs", "60"},
      {"num_layers", "2"},
      {"num_eval_graphs", "50"},
      {"num_icl_graphs", "50"},
      {"regime", "one_directional_people"},
      {"sft_direction", "both"},
      {"icl_templates", "3"},
      {"icl_inversion_orderings", "2"},
      {"icl_symmetry_orderings", "1"},
      {"d_model", "128"},
      {"n_heads", "4"},
      {"d_ff", "0"},
      {"max_context", "128"},
      {"tokens_per_iteration", "4096"},
      {"micro_batch_rows", "32"},
      {"max_lr", "0.002"},
      {"min_lr", "0.0002"},
      {"warmup", "100"},
      {"weight_decay", "0.1"},
      {"grad_clip", "1"},
      {"max_iterations", "0"},
      {"document_mask", "0"},
      {"checkpoint_every", "0"},
      {"sft_tokens_per_iteration", "4096"},
      {"sft_lr", "0.0005"},
      {"sft_epochs", "10"},
      {"sft_max_iterations", "0"},
      {"diffusion_epochs", "60"},
      {"diffusion_max_iterations", "0"},
      {"diffusion_lr", "0.002"},
      {"t_min", "0.01"},
      {"strategy", "topk"},
      {"temperature", "0.8"},
      {"top_k", "100"},
      {"max_new_tokens", "16"},
      {"block_size", "4"},
      {"refinements", "2"},
      {"eval_each_epoch", "0"},
  };
  return m;
}

ConfigMap profile(std::string_view name) {
  if (name == "desk")
    return {{"num_train_samples", "200"}, {"num_template", "4"}, {"num_layers", "2"}, {"d_model", "128"},
            {"n_heads", "4"},             {"num_eval_graphs", "50"}, {"num_icl_graphs", "50"},
            {"tokens_per_iteration", "2048"}, {"max_lr", "0.003"}};
  if (name == "full")
    return {{"num_train_samples", "20000"},
            {"num_template", "10"},
            {"num_training_epochs", "1400"},
            {"num_layers", "12"},
            {"d_model", "768"},
            {"n_heads", "12"},
            {"max_context", "1024"},
            {"num_eval_graphs", "500"},
            {"num_icl_graphs", "300"},
            {"tokens_per_iteration", "491520"},
            {"micro_batch_rows", "8"},
            {"max_lr", "0.0006"},
            {"min_lr", "0.00006"},
            {"warmup", "500"},
            {"sft_tokens_per_iteration", "32768"},
            {"sft_lr", "0.00003"},
            {"sft_epochs", "1"},
            {"sft_max_iterations", "2000"},
            {"diffusion_lr", "0.0006"}};
  throw ConfigError("unknown profile '" + std::string(name) + "' (known: desk, full)");
}

void apply_env_overrides(ConfigMap& config) {
  for (const auto& [key, def] : default_config()) {
    std::string env = "RELSEM_";
    for (char c : key) env.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (const char* v = std::getenv(env.c_str())) config[key] = v;
  }
}

ConfigMap resolve_layers(const ConfigMap& file, const ConfigMap& flags, bool use_env) {
  ConfigMap env;
  if (use_env) apply_env_overrides(env);
  std::string prof;
  for (const ConfigMap* layer : {&file, static_cast<const ConfigMap*>(&env), &flags})
    if (auto it = layer->find("profile"); it != layer->end()) prof = it->second;
  ConfigMap out = default_config();
  if (!prof.empty())
    for (const auto& [k, v] : profile(prof)) out[k] = v;
  for (const ConfigMap* layer : {&file, static_cast<const ConfigMap*>(&env), &flags})
    for (const auto& [k, v] : *layer) out[canonical_key(k)] = v;
  out["profile"] = prof;
  return out;
}

ExperimentConfig make_experiment_config(const ConfigMap& input) {
  ConfigMap m = default_config();
  for (const auto& [k, v] : input) {
    const auto key = canonical_key(k);
    if (!default_config().contains(key)) throw ConfigError("unknown config key '" + k + "'");
    m[key] = v;
  }
  ExperimentConfig c;
  c.name = m.at("name");
  if (c.name.empty() || c.name.find('/') != std::string::npos || c.name == "." || c.name == "..")
    throw ConfigError("run name must be a plain directory name");
  c.runs_dir = m.at("runs_dir");
  c.profile = m.at("profile");
  c.seed = static_cast<std::uint64_t>(to_i64(m, "seed"));
  c.threads = to_int(m, "threads");
  c.num_train_samples = to_int(m, "num_train_samples");
  c.num_template = to_int(m, "num_template");
  c.num_training_epochs = to_int(m, "num_training_epochs");
  c.num_layers = to_int(m, "num_layers");
  c.num_eval_graphs = to_int(m, "num_eval_graphs");
  c.num_icl_graphs = to_int(m, "num_icl_graphs");
  if (c.num_train_samples < 1 || c.num_template < 1 || c.num_training_epochs < 1 || c.num_layers < 1)
    throw ConfigError("N, K, E and L must all be positive");
  if (c.num_eval_graphs < 0 || c.num_icl_graphs < 0) throw ConfigError("graph counts must be >= 0");
  try {
    c.regime = parse_direction_regime(m.at("regime"));
    c.sft_direction = parse_sft_direction(m.at("sft_direction"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.icl.templates = to_int(m, "icl_templates");
  c.icl.inversion_orderings = to_int(m, "icl_inversion_orderings");
  c.icl.symmetry_orderings = to_int(m, "icl_symmetry_orderings");
  if (c.icl.templates < 1 || c.icl.templates > 4 || c.icl.inversion_orderings < 1 || c.icl.inversion_orderings > 2 ||
      c.icl.symmetry_orderings < 1 || c.icl.symmetry_orderings > 2)
    throw ConfigError("ICL yield out of range");

  c.model.n_layers = c.num_layers;
  c.model.n_heads = to_int(m, "n_heads");
  c.model.d_model = to_int(m, "d_model");
  c.model.d_ff = to_int(m, "d_ff");
  c.model.max_context = to_int(m, "max_context");
  c.model.vocab_size = 1;  // set from the vocabulary when a model is built
  c.model.validate();

  TrainConfig base;
  base.context = c.model.max_context;
  base.micro_batch_rows = to_int(m, "micro_batch_rows");
  base.min_lr = to_float(m, "min_lr");
  base.warmup = to_i64(m, "warmup");
  base.weight_decay = to_float(m, "weight_decay");
  base.grad_clip = to_float(m, "grad_clip");
  base.t_min = to_float(m, "t_min");
  base.checkpoint_every = to_i64(m, "checkpoint_every");
  base.seed = c.seed;

  c.pretrain = base;
  c.pretrain.objective = Objective::Pretrain;
  c.pretrain.tokens_per_iteration = to_i64(m, "tokens_per_iteration");
  c.pretrain.max_lr = to_float(m, "max_lr");
  c.pretrain.epochs = c.num_training_epochs;
  c.pretrain.max_iterations = to_i64(m, "max_iterations");
  c.pretrain.document_mask = to_bool(m, "document_mask");

  c.sft = base;
  c.sft.objective = Objective::Sft;
  c.sft.tokens_per_iteration = to_i64(m, "sft_tokens_per_iteration");
  c.sft.max_lr = to_float(m, "sft_lr");
  c.sft.min_lr = std::min(c.sft.min_lr, c.sft.max_lr);
  c.sft.constant_lr = true;
  c.sft.warmup = 0;
  c.sft.epochs = to_int(m, "sft_epochs");
  c.sft.max_iterations = to_i64(m, "sft_max_iterations");

  c.diffusion = base;
  c.diffusion.objective = Objective::Diffusion;
  c.diffusion.tokens_per_iteration = c.pretrain.tokens_per_iteration;
  c.diffusion.max_lr = to_float(m, "diffusion_lr");
  c.diffusion.min_lr = std::min(c.diffusion.min_lr, c.diffusion.max_lr);
  c.diffusion.epochs = to_int(m, "diffusion_epochs");
  c.diffusion.max_iterations = to_i64(m, "diffusion_max_iterations");
  for (const auto* t : {&c.pretrain, &c.sft, &c.diffusion}) t->validate();

  try {
    c.score.gen.strategy = parse_strategy(m.at("strategy"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.score.gen.temperature = to_float(m, "temperature");
  c.score.gen.top_k = to_int(m, "top_k");
  c.score.gen.max_new_tokens = to_int(m, "max_new_tokens");
  c.score.gen.validate();
  c.score.diffusion.block_size = to_int(m, "block_size");
  c.score.diffusion.refinements = to_int(m, "refinements");
  c.score.diffusion.validate();
  c.score.seed = derive_seed(c.seed, {0xE7A1});
  c.eval_each_epoch = to_bool(m, "eval_each_epoch");
  return c;
}

ConfigMap ExperimentConfig::to_map() const {
  return {
      {"name", name},
      {"runs_dir", runs_dir.string()},
      {"profile", profile},
      {"seed", str(seed)},
      {"threads", str(threads)},
      {"num_train_samples", str(num_train_samples)},
      {"num_template", str(num_template)},
      {"num_training_epochs", str(num_training_epochs)},
      {"num_layers", str(num_layers)},
      {"num_eval_graphs", str(num_eval_graphs)},
      {"num_icl_graphs", str(num_icl_graphs)},
      {"regime", std::string(to_string(regime))},
      {"sft_direction", std::string(to_string(sft_direction))},
      {"icl_templates", str(icl.templates)},
      {"icl_inversion_orderings", str(icl.inversion_orderings)},
      {"icl_symmetry_orderings", str(icl.symmetry_orderings)},
      {"d_model", str(model.d_model)},
      {"n_heads", str(model.n_heads)},
      {"d_ff", str(model.d_ff)},
      {"max_context", str(model.max_context)},
      {"tokens_per_iteration", str(pretrain.tokens_per_iteration)},
      {"micro_batch_rows", str(pretrain.micro_batch_rows)},
      {"max_lr", str(pretrain.max_lr)},
      {"min_lr", str(pretrain.min_lr)},
      {"warmup", str(pretrain.warmup)},
      {"weight_decay", str(pretrain.weight_decay)},
      {"grad_clip", str(pretrain.grad_clip)},
      {"max_iterations", str(pretrain.max_iterations)},
      {"document_mask", pretrain.document_mask ? "1" : "0"},
      {"checkpoint_every", str(pretrain.checkpoint_every)},
      {"sft_tokens_per_iteration", str(sft.tokens_per_iteration)},
      {"sft_lr", str(sft.max_lr)},
      {"sft_epochs", str(sft.epochs)},
      {"sft_max_iterations", str(sft.max_iterations)},
      {"diffusion_epochs", str(diffusion.epochs)},
      {"diffusion_max_iterations", str(diffusion.max_iterations)},
      {"diffusion_lr", str(diffusion.max_lr)},
      {"t_min", str(pretrain.t_min)},
      {"strategy", std::string(to_string(score.gen.strategy))},
      {"temperature", str(score.gen.temperature)},
      {"top_k", str(score.gen.top_k)},
      {"max_new_tokens", str(score.gen.max_new_tokens)},
      {"block_size", str(score.diffusion.block_size)},
      {"refinements", str(score.diffusion.refinements)},
      {"eval_each_epoch", eval_each_epoch ? "1" : "0"},
  };
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> ExperimentConfig::axes() const {
  auto m = to_map();
  for (const auto& k : kNonAxisKeys) m.erase(k);
  return m;
}

}  // namespace relsem
