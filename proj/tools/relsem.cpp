#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relsem/error.hpp"
#include "relsem/pipeline.hpp"

using namespace relsem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string x; std::getline(ss, x, ',');)
    if (!x.empty()) out.push_back(x);
  return out;
}

void print_report(const EvalReport& r) {
  std::printf("%-14s %-8s %-10s %8s %8s %9s\n", "category", "dir", "mode", "correct", "count", "accuracy");
  for (const auto& [key, g] : r.groups)
    std::printf("%-14s %-8s %-10s %8zu %8zu %9.4f\n", std::string(to_string(std::get<0>(key))).c_str(),
                std::string(to_string(std::get<1>(key))).c_str(), std::string(to_string(std::get<2>(key))).c_str(),
                g.correct, g.count, g.accuracy());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic knowledge-graph corpora, small transformers, and reversal/logic evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  app.add_option("-c,--config", config_file, "key = value configuration file");
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, def] : default_config()) {
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    if (key == "num_train_samples") names += ",--N";
    if (key == "num_template") names += ",--K";
    if (key == "num_training_epochs") names += ",--E";
    if (key == "num_layers") names += ",--L";
    app.add_option_function<std::string>(
           names, [&flag_values, key](const std::string& v) { flag_values[key] = v; },
           def.empty() ? std::string("(unset)") : "default " + def)
        ->group("Experiment");
  }
  std::vector<std::string> sets;
  app.add_option("--set", sets, "Extra key=value overrides")->group("Experiment");

  auto* gen = app.add_subcommand("gen-data", "Generate graphs, corpus, SFT pairs, query suites and vocabulary");
  bool resume = false;
  auto* pre = app.add_subcommand("pretrain", "Next-token pretraining on the corpus");
  pre->add_flag("--resume", resume, "Continue from the last step checkpoint");
  auto* sft = app.add_subcommand("sft", "Answer-masked fine-tuning of the pretrained model");
  sft->add_flag("--resume", resume, "Continue from the last step checkpoint");
  auto* dif = app.add_subcommand("train-diffusion", "Masked-diffusion training of a bidirectional model");
  dif->add_flag("--resume", resume, "Continue from the last step checkpoint");

  std::string stage_name = "sft", direction = "both";
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the query suite");
  ev->add_option("--stage", stage_name, "pretrain, sft or diffusion")->capture_default_str();
  ev->add_option("--direction", direction, "forward, reverse or both")->capture_default_str();

  std::string category = "icl_comp_inv";
  auto* pr = app.add_subcommand("probe", "Layer-wise logit-lens probe");
  pr->add_option("--stage", stage_name, "pretrain, sft or diffusion")->capture_default_str();
  pr->add_option("--category", category, "Query category to probe")->capture_default_str();

  std::string axis, values;
  auto* sw = app.add_subcommand("sweep", "Run the full recipe for each value of one axis, then report");
  sw->add_option("--axis", axis, "Config key to vary (N, K, E, L or any key)")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();

  std::string runs;
  auto* rp = app.add_subcommand("report", "Collect eval reports of several runs into sweep curves");
  rp->add_option("--runs", runs, "Comma-separated run directories")->required();
  rp->add_option("--stage", stage_name, "Which eval report to collect")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigMap flags(flag_values.begin(), flag_values.end());
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      flags[canonical_key(s.substr(0, eq))] = s.substr(eq + 1);
    }
    const auto cfg = load_run_config(flags, config_file ? std::optional<std::filesystem::path>(*config_file)
                                                        : std::nullopt);
    apply_threads(cfg);
    auto progress = [](const TraceRow& r) {
      if (r.iteration % 50 == 0 || !r.metrics.empty())
        std::fprintf(stderr, "iter %lld epoch %d loss %.4f lr %.3g\n", static_cast<long long>(r.iteration), r.epoch,
                     r.loss, r.lr);
    };

    if (*gen) {
      const auto s = gen_data(cfg);
      std::printf("run %s: %zu documents, %zu sft pairs, %zu queries, vocab %zu\n", run_path(cfg).c_str(),
                  s.documents, s.sft_pairs, s.queries, s.vocab_size);
    } else if (*pre || *sft || *dif) {
      const Stage stage = *pre ? Stage::Pretrain : *sft ? Stage::Sft : Stage::Diffusion;
      const auto st = run_training(cfg, stage, resume, progress);
      std::printf("%s: %lld iterations, final loss %.4f\n", std::string(to_string(stage)).c_str(),
                  static_cast<long long>(st.iteration), st.trace.empty() ? 0.0 : st.trace.back().loss);
    } else if (*ev) {
      std::optional<Direction> dir;
      if (direction != "both") dir = parse_direction(direction);
      print_report(run_eval(cfg, parse_stage(stage_name), dir));
    } else if (*pr) {
      const auto recs = run_probe(cfg, parse_stage(stage_name), parse_category(category));
      std::printf("%5s %12s %12s %12s %8s\n", "layer", "mean_logit", "mean_prob", "mean_rank", "prompts");
      for (const auto& r : recs)
        std::printf("%5d %12.4f %12.6f %12.2f %8zu\n", r.layer, r.mean_logit, r.mean_prob, r.mean_rank, r.n_prompts);
    } else if (*sw) {
      const auto res = run_sweep(cfg, axis, split_list(values), [](const std::string& m) {
        std::fprintf(stderr, "%s\n", m.c_str());
      });
      std::fputs(res.csv.c_str(), stdout);
      for (const auto& [series, value] : res.transitions)
        std::printf("transition %s: %s\n", series.c_str(), value.c_str());
    } else if (*rp) {
      std::vector<std::filesystem::path> dirs;
      for (const auto& r : split_list(runs)) dirs.emplace_back(r);
      const auto res = run_report(cfg, dirs, parse_stage(stage_name));
      std::fputs(res.csv.c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: InternalError: %s\n", e.what());
    return 3;
  }
  return 0;
}
