#include "relsem/pipeline.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "relsem/checkpoint.hpp"
#include "relsem/error.hpp"
#include "relsem/hashing.hpp"
#include "relsem/kg_synth.hpp"
#include "relsem/templates.hpp"
#include "relsem/tokenizer.hpp"

namespace relsem {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Seed paths under the experiment seed, one per artifact.
enum SeedPath : std::uint64_t {
  kPoolsSeed = 1,
  kGraphsSeed,
  kCorpusSeed,
  kSftSeed,
  kSuiteSeed,
  kClozeSeed,
  kDiffusionDataSeed,
  kPretrainInit,
  kPretrainData,
  kSftData,
  kDiffusionInit,
  kDiffusionData,
};

std::string to_text_bytes(const std::function<void(std::ostream&)>& f) {
  std::ostringstream out;
  f(out);
  return out.str();
}

fs::path rel(const fs::path& root, const fs::path& p) { return fs::relative(p, root); }

ojson read_json_or_empty(const fs::path& p) {
  if (!fs::exists(p)) return ojson::object();
  return ojson::parse(read_file(p));
}

ojson manifest_config(const ExperimentConfig& cfg) {
  ojson c = ojson::object();
  for (const auto& [k, v] : cfg.to_map())
    if (k != "name" && k != "runs_dir") c[k] = v;
  return c;
}

void record_stage(const ExperimentConfig& cfg, const std::string& stage, const std::vector<fs::path>& inputs,
                  const std::vector<fs::path>& outputs, ojson extra, double seconds) {
  const auto root = run_path(cfg);
  ojson m = read_json_or_empty(root / "manifest.json");
  m["tool_version"] = kToolVersion;
  ojson entry = ojson::object();
  entry["config"] = manifest_config(cfg);
  ojson in = ojson::object(), out = ojson::object();
  for (const auto& p : inputs) in[rel(root, p).generic_string()] = git_blob_hash_file(p);
  for (const auto& p : outputs) out[rel(root, p).generic_string()] = git_blob_hash_file(p);
  entry["inputs"] = in;
  entry["outputs"] = out;
  for (auto& [k, v] : extra.items()) entry[k] = v;
  if (!m.contains("stages")) m["stages"] = ojson::object();
  m["stages"][stage] = entry;
  write_file(root / "manifest.json", m.dump(2) + "\n");

  ojson t = read_json_or_empty(root / "timings.json");
  t[stage] = seconds;
  write_file(root / "timings.json", t.dump(2) + "\n");
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct DataPaths {
  fs::path dir, pools, graphs, vocab, corpus, provenance, sft, suite, cloze, diffusion;
  explicit DataPaths(const fs::path& root)
      : dir(root / "data"),
        pools(dir / "pools.json"),
        graphs(dir / "graphs.jsonl"),
        vocab(dir / "vocab.txt"),
        corpus(dir / "corpus.txt"),
        provenance(dir / "corpus.provenance.jsonl"),
        sft(dir / "sft.jsonl"),
        suite(dir / "suite.jsonl"),
        cloze(dir / "cloze.jsonl"),
        diffusion(dir / "diffusion.jsonl") {}
};

void require(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw IoError(p.string() + " is missing; run `" + hint + "` first");
}

std::string pools_json(const EntityPools& p) {
  ojson j = {{"first_names", p.first_names},
             {"middle_names", p.middle_names},
             {"last_names", p.last_names},
             {"jobs", p.jobs}};
  return j.dump(1) + "\n";
}

Vocab load_vocab(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return Vocab::load(in);
}

Corpus load_corpus(const DataPaths& d) {
  require(d.corpus, "gen-data");
  std::ifstream text(d.corpus), prov(d.provenance);
  return read_corpus(text, prov);
}

QuerySuite load_suite(const fs::path& p) {
  require(p, "gen-data");
  std::ifstream in(p);
  return read_suite(in);
}

fs::path checkpoint_path(const fs::path& root, Stage s) { return root / "model" / (std::string(to_string(s)) + ".ckpt"); }

std::vector<QueryItem> stage_items(const ExperimentConfig& cfg, Stage stage, std::optional<Direction> direction,
                                   bool completion_only) {
  const DataPaths d(run_path(cfg));
  std::vector<QueryItem> items;
  auto take = [&](const QuerySuite& s) {
    for (const auto& q : s.items) {
      if (direction && q.direction != *direction) continue;
      if (completion_only && q.mode != QueryMode::Completion) continue;
      items.push_back(q);
    }
  };
  take(load_suite(d.suite));
  if (stage == Stage::Diffusion) take(load_suite(d.cloze));
  return items;
}

void write_trace(const fs::path& p, const std::vector<TraceRow>& trace) {
  write_file(p, to_text_bytes([&](std::ostream& o) { write_trace_csv(trace, o); }));
}

std::vector<TraceRow> read_trace(const fs::path& p) {
  std::vector<TraceRow> rows;
  if (!fs::exists(p)) return rows;
  std::istringstream in(read_file(p));
  std::string line;
  std::vector<std::string> header;
  if (std::getline(in, line)) {
    std::istringstream hs(line);
    for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  }
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    if (f.size() < 4) continue;
    TraceRow r{std::stoll(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), {}};
    for (std::size_t i = 4; i < f.size() && i < header.size(); ++i)
      if (!f[i].empty()) r.metrics[header[i]] = std::stod(f[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

fs::path run_path(const ExperimentConfig& cfg) { return cfg.runs_dir / cfg.name; }

ExperimentConfig load_run_config(const ConfigMap& flags, const std::optional<fs::path>& config_file, bool use_env) {
  ConfigMap env;
  if (use_env) apply_env_overrides(env);
  std::string name = default_config().at("name"), runs = default_config().at("runs_dir");
  ConfigMap file_layer;
  if (config_file) file_layer = load_config_file(*config_file);
  for (const ConfigMap* layer : {static_cast<const ConfigMap*>(&file_layer), static_cast<const ConfigMap*>(&env), &flags}) {
    if (auto it = layer->find("name"); it != layer->end()) name = it->second;
    if (auto it = layer->find("runs_dir"); it != layer->end()) runs = it->second;
  }
  ConfigMap base;
  const auto stored = fs::path(runs) / name / "config.txt";
  if (fs::exists(stored)) base = load_config_file(stored);
  for (const auto& [k, v] : file_layer) base[k] = v;
  auto cfg = make_experiment_config(resolve_layers(base, flags, use_env));
  return cfg;
}

void apply_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Pretrain: return "pretrain";
    case Stage::Sft: return "sft";
    case Stage::Diffusion: return "diffusion";
  }
  return "pretrain";
}

Stage parse_stage(std::string_view text) {
  if (text == "pretrain") return Stage::Pretrain;
  if (text == "sft") return Stage::Sft;
  if (text == "diffusion") return Stage::Diffusion;
  throw ConfigError("unknown stage '" + std::string(text) + "' (pretrain, sft, diffusion)");
}

GenDataSummary gen_data(const ExperimentConfig& cfg) {
  Stopwatch clock;
  const auto root = run_path(cfg);
  fs::create_directories(root);
  const DataPaths d(root);
  write_file(root / "config.txt", cfg.to_text());

  const auto& bank = TemplateBank::standard();
  const auto pools = build_pools(derive_seed(cfg.seed, {kPoolsSeed}));
  GraphCounts counts{cfg.num_train_samples, cfg.num_eval_graphs, cfg.num_icl_graphs};
  const auto graphs = sample_graph_set(counts, pools, RelationVocab::standard(), derive_seed(cfg.seed, {kGraphsSeed}));
  const auto corpus =
      build_pretrain_corpus(graphs, cfg.num_template, bank, derive_seed(cfg.seed, {kCorpusSeed}), cfg.regime);
  check_icl_leak(graphs, corpus);
  const auto sft = build_sft_corpus(graphs, corpus, bank, derive_seed(cfg.seed, {kSftSeed}), cfg.sft_direction);
  SuiteConfig sc;
  sc.icl = cfg.icl;
  const auto suite = gen_suite(graphs, bank, derive_seed(cfg.seed, {kSuiteSeed}), sc);
  QuerySuite cloze;
  for (auto dir : {Direction::Forward, Direction::Reverse}) {
    auto items = gen_cloze_queries(graphs, bank, dir, derive_seed(cfg.seed, {kClozeSeed}));
    cloze.items.insert(cloze.items.end(), items.begin(), items.end());
  }
  Rng drng(derive_seed(cfg.seed, {kDiffusionDataSeed}));
  const auto diffusion = restructure_for_diffusion(corpus, drng);
  const auto vocab = build_vocab(bank, pools);

  write_file(d.pools, pools_json(pools));
  write_file(d.graphs, to_text_bytes([&](std::ostream& o) { write_graph_set(graphs, o); }));
  write_file(d.vocab, to_text_bytes([&](std::ostream& o) { vocab.save(o); }));
  {
    std::ostringstream text, prov;
    write_corpus(corpus, text, prov);
    write_file(d.corpus, text.str());
    write_file(d.provenance, prov.str());
  }
  write_file(d.sft, to_text_bytes([&](std::ostream& o) { write_sft(sft, o); }));
  write_file(d.suite, to_text_bytes([&](std::ostream& o) { write_suite(suite, o); }));
  write_file(d.cloze, to_text_bytes([&](std::ostream& o) { write_suite(cloze, o); }));
  write_file(d.diffusion, to_text_bytes([&](std::ostream& o) { write_diffusion_corpus(diffusion, o); }));

  ojson extra = {{"seed", cfg.seed},
                 {"suite_counts", ojson::parse(suite_manifest(suite))},
                 {"cloze_counts", ojson::parse(suite_manifest(cloze))},
                 {"documents", corpus.documents.size()},
                 {"sft_pairs", sft.size()},
                 {"vocab_size", vocab.size()},
                 {"diffusion_degenerate_sources", diffusion.degenerate_sources}};
  record_stage(cfg, "gen-data", {},
               {d.pools, d.graphs, d.vocab, d.corpus, d.provenance, d.sft, d.suite, d.cloze, d.diffusion}, extra,
               clock.seconds());
  return {corpus.documents.size(), sft.size(), suite.items.size(), vocab.size()};
}

TrainState run_training(const ExperimentConfig& cfg, Stage stage, bool resume,
                        const std::function<void(const TraceRow&)>& progress) {
  Stopwatch clock;
  const auto root = run_path(cfg);
  const DataPaths d(root);
  require(d.vocab, "gen-data");
  const auto vocab = load_vocab(d.vocab);
  const auto out_path = checkpoint_path(root, stage);
  const auto step_path = root / "model" / (std::string(to_string(stage)) + ".step.ckpt");
  const auto trace_path = root / "trace" / (std::string(to_string(stage)) + ".csv");

  TrainConfig tc = stage == Stage::Pretrain ? cfg.pretrain : stage == Stage::Sft ? cfg.sft : cfg.diffusion;
  std::vector<fs::path> inputs{d.vocab};
  std::unique_ptr<BatchSource> batches;
  std::optional<Model> model;
  switch (stage) {
    case Stage::Pretrain: {
      tc.seed = derive_seed(cfg.seed, {kPretrainData});
      batches = std::make_unique<PretrainBatches>(load_corpus(d), vocab, tc);
      inputs.push_back(d.corpus);
      ModelConfig mc = cfg.model;
      mc.vocab_size = static_cast<int>(vocab.size());
      model.emplace(mc, derive_seed(cfg.seed, {kPretrainInit}));
      break;
    }
    case Stage::Sft: {
      tc.seed = derive_seed(cfg.seed, {kSftData});
      require(d.sft, "gen-data");
      std::ifstream in(d.sft);
      batches = std::make_unique<SftBatches>(read_sft(in), vocab, tc);
      const auto base = checkpoint_path(root, Stage::Pretrain);
      require(base, "pretrain");
      inputs.push_back(d.sft);
      inputs.push_back(base);
      model.emplace(load_checkpoint(base).model);
      break;
    }
    case Stage::Diffusion: {
      tc.seed = derive_seed(cfg.seed, {kDiffusionData});
      require(d.diffusion, "gen-data");
      std::ifstream in(d.diffusion);
      batches = std::make_unique<DiffusionBatches>(read_diffusion_corpus(in), vocab, tc);
      inputs.push_back(d.diffusion);
      ModelConfig mc = cfg.model;
      mc.vocab_size = static_cast<int>(vocab.size());
      mc.attention = AttentionMode::Bidirectional;
      model.emplace(mc, derive_seed(cfg.seed, {kDiffusionInit}));
      break;
    }
  }

  AdamW optimizer(AdamWConfig{0.9f, 0.999f, 1e-8f, tc.weight_decay});
  TrainState state;
  if (resume && fs::exists(step_path)) {
    auto ck = load_checkpoint(step_path);
    model.emplace(std::move(ck.model));
    if (ck.optimizer) {
      optimizer.set_steps(ck.optimizer->steps());
      optimizer.first_moments() = std::move(ck.optimizer->first_moments());
      optimizer.second_moments() = std::move(ck.optimizer->second_moments());
    }
    state.iteration = std::stoll(ck.meta.at("iteration"));
    for (auto& r : read_trace(trace_path))
      if (r.iteration <= state.iteration) state.trace.push_back(std::move(r));
  }

  CheckpointMeta meta{{"stage", std::string(to_string(stage))}, {"vocab", git_blob_hash_file(d.vocab)}};
  TrainHooks hooks;
  hooks.on_iteration = progress;
  hooks.on_checkpoint = [&](std::int64_t it, const Model& m, const AdamW& opt) {
    auto mm = meta;
    mm["iteration"] = std::to_string(it);
    fs::create_directories(step_path.parent_path());
    save_checkpoint(step_path, m, mm, &opt);
    write_trace(trace_path, state.trace);
  };
  if (cfg.eval_each_epoch) {
    const auto items = stage_items(cfg, stage, std::nullopt, stage != Stage::Sft);
    hooks.on_epoch_end = [&, items](int, const Model& m) {
      return score_items(m, vocab, items, cfg.score).metrics();
    };
  }
  train(*model, optimizer, *batches, tc, state, hooks);

  fs::create_directories(out_path.parent_path());
  meta["iteration"] = std::to_string(state.iteration);
  save_checkpoint(out_path, *model, meta, &optimizer);
  write_trace(trace_path, state.trace);
  ojson extra = {{"train_seed", tc.seed},
                 {"iterations", state.iteration},
                 {"iterations_per_epoch", batches->iterations_per_epoch()},
                 {"rows_per_iteration", tc.rows_per_iteration()},
                 {"model", model->config().to_text()},
                 {"parameters", model->parameter_count()}};
  record_stage(cfg, std::string(to_string(stage)), inputs, {out_path, trace_path}, extra, clock.seconds());
  return state;
}

EvalReport run_eval(const ExperimentConfig& cfg, Stage stage, std::optional<Direction> direction) {
  Stopwatch clock;
  const auto root = run_path(cfg);
  const DataPaths d(root);
  const auto ckpt = checkpoint_path(root, stage);
  require(ckpt, std::string(to_string(stage)));
  const auto vocab = load_vocab(d.vocab);
  const auto model = load_checkpoint(ckpt).model;
  // Pretrained-only and diffusion models are scored on completion items.
  const auto items = stage_items(cfg, stage, direction, stage != Stage::Sft);
  if (items.empty()) throw EmptyPromptSet("no query items selected");
  const auto report = score_items(model, vocab, items, cfg.score);

  const auto base = root / "reports" / ("eval_" + std::string(to_string(stage)));
  auto json_path = base, csv_path = base;
  json_path += ".json";
  csv_path += ".csv";
  write_file(json_path, to_text_bytes([&](std::ostream& o) { write_report_json(report, o); }));
  write_file(csv_path, to_text_bytes([&](std::ostream& o) { write_report_csv(report, o); }));
  record_stage(cfg, "eval-" + std::string(to_string(stage)), {ckpt, d.suite}, {json_path, csv_path},
               {{"direction", direction ? std::string(to_string(*direction)) : "both"}, {"items", items.size()}},
               clock.seconds());
  return report;
}

std::vector<LayerProbeRecord> run_probe(const ExperimentConfig& cfg, Stage stage, Category category) {
  Stopwatch clock;
  const auto root = run_path(cfg);
  const DataPaths d(root);
  const auto ckpt = checkpoint_path(root, stage);
  require(ckpt, std::string(to_string(stage)));
  const auto vocab = load_vocab(d.vocab);
  const auto model = load_checkpoint(ckpt).model;
  std::vector<QueryItem> items;
  for (const auto& q : load_suite(d.suite).items)
    if (q.category == category) items.push_back(q);
  const auto records = probe_layers(model, probe_prompts(items, vocab));

  const auto name = std::string(to_string(stage)) + "_" + std::string(to_string(category));
  const auto csv_path = root / "probe" / (name + ".csv");
  const auto svg_path = root / "probe" / (name + ".svg");
  const auto csv = to_text_bytes([&](std::ostream& o) { write_probe_csv(records, std::string(to_string(category)), o); });
  write_file(csv_path, csv);
  std::istringstream back(csv);
  write_file(svg_path, probe_svg(read_probe_csv(back)));
  record_stage(cfg, "probe-" + name, {ckpt, d.suite}, {csv_path, svg_path}, {{"prompts", items.size()}},
               clock.seconds());
  return records;
}

SweepResult run_report(const ExperimentConfig& cfg, const std::vector<fs::path>& runs, Stage stage) {
  std::vector<SweepRun> sr;
  for (const auto& r : runs) {
    const auto cfg_path = r / "config.txt";
    const auto rep_path = r / "reports" / ("eval_" + std::string(to_string(stage)) + ".json");
    require(cfg_path, "gen-data");
    require(rep_path, "eval");
    const auto rc = make_experiment_config(load_config_file(cfg_path));
    std::istringstream in(read_file(rep_path));
    sr.push_back({rc.axes(), read_report_json(in)});
  }
  auto result = sweep_report(sr);
  const auto dir = run_path(cfg) / "reports";
  write_file(dir / "sweep.csv", result.csv);
  for (const auto& [fam, doc] : result.svgs) write_file(dir / ("sweep_" + fam + ".svg"), doc);
  ojson t = ojson::object();
  for (const auto& [k, v] : result.transitions) t[k] = v;
  write_file(dir / "transitions.json", t.dump(2) + "\n");
  return result;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis, const std::vector<std::string>& values,
                      const std::function<void(const std::string&)>& log) {
  if (values.size() < 2) throw AxisMismatch("a sweep needs at least two values");
  const auto key = canonical_key(axis);
  if (!default_config().contains(key)) throw ConfigError("unknown sweep axis '" + axis + "'");
  std::vector<fs::path> children;
  for (const auto& v : values) {
    auto m = cfg.to_map();
    m[key] = v;
    m["name"] = key + "=" + v;
    m["runs_dir"] = (run_path(cfg) / "sweep").string();
    const auto child = make_experiment_config(m);
    if (log) log("sweep " + key + "=" + v + ": gen-data");
    gen_data(child);
    if (log) log("sweep " + key + "=" + v + ": pretrain");
    run_training(child, Stage::Pretrain);
    if (log) log("sweep " + key + "=" + v + ": sft");
    run_training(child, Stage::Sft);
    if (log) log("sweep " + key + "=" + v + ": eval");
    run_eval(child, Stage::Sft);
    children.push_back(run_path(child));
  }
  return run_report(cfg, children, Stage::Sft);
}

}  // namespace relsem
