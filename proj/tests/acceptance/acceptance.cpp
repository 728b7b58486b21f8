// Acceptance gate: runs criteria 1-9 and prints one PASS/FAIL line each.
// Usage: acceptance [--work DIR] [criterion ...]

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../common/gradcheck.hpp"
#include "../common/reference_model.hpp"
#include "relsem/checkpoint.hpp"
#include "relsem/config.hpp"
#include "relsem/error.hpp"
#include "relsem/evalgen.hpp"
#include "relsem/hashing.hpp"
#include "relsem/inference.hpp"
#include "relsem/pipeline.hpp"
#include "relsem/probe.hpp"
#include "relsem/training.hpp"
#include "relsem/verbalizer.hpp"

using namespace relsem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---- 1. corpus structure ----

Outcome corpus_structure() {
  const auto pools = build_pools(101);
  const auto graphs = sample_graph_set({1000, 1000, 1000}, pools, RelationVocab::standard(), 102);
  const std::map<std::string, std::string> inverse{{"father", "son"},   {"son", "father"},  {"husband", "wife"},
                                                   {"wife", "husband"}, {"uncle", "niece"}, {"niece", "uncle"}};
  const std::set<std::string> symmetric{"friend", "brother", "spouse"};
  const std::map<GraphKind, std::set<int>> expected_indices{
      {GraphKind::Train, {1, 2, 3, 4, 5, 6, 7}}, {GraphKind::Evaluation, {1, 3, 5, 6, 7}}, {GraphKind::Icl, {1, 3}}};
  const std::map<GraphKind, std::size_t> expected_count{
      {GraphKind::Train, 7}, {GraphKind::Evaluation, 5}, {GraphKind::Icl, 2}};

  long violations = 0;
  std::map<GraphKind, int> per_kind;
  std::set<std::string> names;
  std::size_t persons = 0;
  for (const auto& g : graphs.graphs) {
    ++per_kind[g.kind];
    if (g.triples.size() != expected_count.at(g.kind)) ++violations;
    std::set<int> idx;
    for (const auto& t : g.triples) idx.insert(t.canonical_index);
    if (idx != expected_indices.at(g.kind)) ++violations;
    const auto& p = g.persons;
    for (const auto& t : g.triples) {
      bool ok = false;
      switch (t.canonical_index) {
        case 1: ok = t.head == p[0] && t.tail == p[1] && inverse.contains(t.relation); break;
        case 2: ok = t.head == p[1] && t.tail == p[0] && inverse.contains(t.relation) &&
                     inverse.at(t.relation) == g.find(1)->relation; break;
        case 3: ok = t.head == p[1] && t.tail == p[2] && symmetric.contains(t.relation); break;
        case 4: ok = t.head == p[2] && t.tail == p[1] && t.relation == g.find(3)->relation; break;
        default: {
          const auto i = static_cast<std::size_t>(t.canonical_index - 5);
          ok = t.head == p[i] && t.relation == "job" && i < g.jobs.size() && t.tail == g.jobs[i];
        }
      }
      if (!ok) ++violations;
    }
    for (const auto& n : p) names.insert(n);
    persons += 3;
  }
  if (per_kind[GraphKind::Train] != 1000 || per_kind[GraphKind::Evaluation] != 1000 || per_kind[GraphKind::Icl] != 1000)
    ++violations;
  const long disjoint_violations = static_cast<long>(persons - names.size());

  // Withheld facts: in every evaluation sentence naming two persons, the head
  // comes first, and the p0/p1 sentence uses the stated relation, not its inverse.
  const auto& bank = TemplateBank::standard();
  const auto corpus = build_pretrain_corpus(graphs, 4, bank, 103);
  long withheld = 0;
  std::size_t eval_sentences = 0;
  for (const auto& d : corpus.documents) {
    if (d.role != ContentRole::Eval) continue;
    const Graph& g = *graphs.find(d.graph_id);
    const auto rel = g.find(1)->relation;
    std::stringstream ss(d.text);
    std::string sentence;
    while (std::getline(ss, sentence, '.')) {
      if (sentence.find_first_not_of(' ') == std::string::npos) continue;
      ++eval_sentences;
      const auto a = sentence.find(g.persons[0]), b = sentence.find(g.persons[1]), c = sentence.find(g.persons[2]);
      if (a != std::string::npos && b != std::string::npos) {
        std::string rest = sentence;
        for (const auto& n : g.persons)
          if (auto at = rest.find(n); at != std::string::npos) rest.replace(at, n.size(), "X");
        const auto words = split_words(rest);
        const bool states_inverse = std::find(words.begin(), words.end(), inverse.at(rel)) != words.end();
        if (b < a || states_inverse) ++withheld;
      }
      if (b != std::string::npos && c != std::string::npos && c < b) ++withheld;
    }
  }

  // ICL entities never reach the corpus: compare every three-word window.
  std::set<std::string> windows;
  for (const auto& d : corpus.documents) {
    const auto w = split_words(d.text);
    for (std::size_t i = 0; i + 2 < w.size(); ++i) windows.insert(w[i] + " " + w[i + 1] + " " + w[i + 2]);
  }
  long leaks = 0;
  for (const auto* g : graphs.of_kind(GraphKind::Icl))
    for (const auto& n : g->persons) leaks += windows.contains(n);

  const bool pass = violations == 0 && disjoint_violations == 0 && withheld == 0 && leaks == 0 &&
                    eval_sentences == 1000 * 4 * 5;
  return {pass, "triple violations " + std::to_string(violations) + ", duplicate names " +
                    std::to_string(disjoint_violations) + ", withheld facts rendered " + std::to_string(withheld) +
                    " in " + std::to_string(eval_sentences) + " eval sentences, ICL leaks " + std::to_string(leaks)};
}

// ---- 2. query counts ----

Outcome query_counts() {
  const auto pools = build_pools(201);
  const auto graphs = sample_graph_set({200, 500, 300}, pools, RelationVocab::standard(), 202);
  const auto suite = gen_suite(graphs, TemplateBank::standard(), 203);
  const std::vector<std::pair<Category, std::size_t>> table{
      {Category::MemPeople, 1000}, {Category::MemJob, 1500},    {Category::LogicInv, 500},
      {Category::LogicSym, 500},   {Category::IclCompInv, 1800}, {Category::IclCompSym, 900},
      {Category::IclQaInv, 1800},  {Category::IclQaSym, 900}};
  const auto counts = suite.counts();
  bool pass = true;
  std::string detail;
  for (auto d : {Direction::Forward, Direction::Reverse}) {
    for (const auto& [c, n] : table) {
      const auto it = counts.find({c, d});
      const std::size_t got = it == counts.end() ? 0 : it->second;
      if (got != n) {
        pass = false;
        detail += std::string(to_string(c)) + "/" + std::string(to_string(d)) + "=" + std::to_string(got) + " ";
      }
    }
  }
  return {pass, pass ? "all 16 groups exact" : "mismatches: " + detail};
}

// ---- 3. autodiff ----

Outcome autodiff() {
  using testing::check_gradients;
  using testing::project;
  using testing::random_tensor;
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double e) {
    if (e > worst) {
      worst = e;
      worst_name = name;
    }
  };
  Rng rng(301);
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      const auto a = random_tensor(ta ? Shape{5, 4} : Shape{4, 5}, rng);
      const auto b = random_tensor(tb ? Shape{3, 5} : Shape{5, 3}, rng);
      note("matmul", check_gradients({{"a", a}, {"b", b}}, [&] { return project(ops::matmul(a, b, ta, tb), 1); }).max_rel_error);
      const auto x = random_tensor(ta ? Shape{2, 5, 4} : Shape{2, 4, 5}, rng);
      const auto y = random_tensor(tb ? Shape{2, 3, 5} : Shape{2, 5, 3}, rng);
      note("bmm", check_gradients({{"x", x}, {"y", y}}, [&] { return project(ops::bmm(x, y, ta, tb), 2); }).max_rel_error);
    }
  const auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), bias = random_tensor({4}, rng);
  note("add", check_gradients({{"a", a}, {"b", b}}, [&] { return project(ops::add(a, b), 3); }).max_rel_error);
  note("add_bias", check_gradients({{"a", a}, {"bias", bias}}, [&] { return project(ops::add(a, bias), 4); }).max_rel_error);
  note("mul", check_gradients({{"a", a}, {"b", b}}, [&] { return project(ops::mul(a, b), 5); }).max_rel_error);
  note("scale", check_gradients({{"a", a}}, [&] { return project(ops::scale(a, 0.7f), 6); }).max_rel_error);
  note("gelu", check_gradients({{"a", a}}, [&] { return project(ops::gelu(a), 7); }).max_rel_error);
  note("sum", check_gradients({{"a", a}}, [&] { return ops::sum(a); }).max_rel_error);
  const auto x = random_tensor({2, 3, 4}, rng), y = random_tensor({2, 3, 2}, rng);
  note("transpose", check_gradients({{"x", x}}, [&] { return project(ops::transpose(x), 8); }).max_rel_error);
  note("split_heads", check_gradients({{"x", x}}, [&] { return project(ops::split_heads(x, 2), 9); }).max_rel_error);
  note("merge_heads", check_gradients({{"x", x}}, [&] { return project(ops::merge_heads(x, 2), 10); }).max_rel_error);
  note("slice_last", check_gradients({{"x", x}}, [&] { return project(ops::slice_last(x, 1, 2), 11); }).max_rel_error);
  note("concat_last", check_gradients({{"x", x}, {"y", y}}, [&] { return project(ops::concat_last({x, y}), 12); }).max_rel_error);
  const std::vector<std::int64_t> rows{4, 0, 4};
  note("gather_rows", check_gradients({{"x", x}}, [&] { return project(ops::gather_rows(x, rows), 13); }).max_rel_error);
  const auto w = random_tensor({7, 4}, rng);
  const std::vector<std::int32_t> ids{3, 1, 3, 6};
  note("embedding", check_gradients({{"w", w}}, [&] { return project(ops::embedding(w, ids, {2, 2}), 14); }).max_rel_error);
  const auto z = random_tensor({3, 6}, rng), g = random_tensor({6}, rng), be = random_tensor({6}, rng);
  note("layer_norm", check_gradients({{"z", z}, {"g", g}, {"b", be}}, [&] { return project(ops::layer_norm(z, g, be), 15); }).max_rel_error);
  note("softmax", check_gradients({{"z", z}}, [&] { return project(ops::softmax(z), 16); }).max_rel_error);
  const auto s = random_tensor({4, 3, 3}, rng);
  const std::vector<std::uint8_t> mask{0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0};
  note("masked_fill", check_gradients({{"s", s}}, [&] { return project(ops::softmax(ops::masked_fill(s, mask, 2, -1e9f)), 17); }).max_rel_error);
  const auto logits = random_tensor({4, 5}, rng);
  const std::vector<std::int32_t> targets{1, -1, 4, 0};
  const std::vector<float> weights{1.0f, 1.0f, 2.5f, 0.5f};
  note("cross_entropy", check_gradients({{"l", logits}}, [&] { return ops::cross_entropy(logits, targets, weights, 3.0f); }).max_rel_error);
  const double ops_worst = worst;

  // End to end: float32 backward against central differences of a
  // double-precision reference forward, for both attention modes.
  double e2e = 0.0, gap = 0.0;
  for (auto mode : {AttentionMode::Causal, AttentionMode::Bidirectional}) {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 8;
    cfg.vocab_size = 11;
    cfg.max_context = 6;
    cfg.attention = mode;
    const Model model(cfg, 302);
    const std::vector<TokenId> tok{1, 7, 3, 9, 2, 1, 4, 4, 10, 6};
    const std::vector<std::int32_t> tgt{7, 3, 9, 2, -1, 4, 4, 10, 6, 5};
    const auto r = testing::check_model_gradients(model, tok, 2, 5, tgt, 9.0f);
    note("model:" + r.worst_leaf, r.max_rel_error);
    e2e = std::max(e2e, r.max_rel_error);
    gap = std::max(gap, r.loss_gap);
  }
  const bool pass = worst < 1e-3 && gap < 1e-5;
  return {pass, "ops max " + fmt("%.2e", ops_worst) + ", 2-layer model max " + fmt("%.2e", e2e) +
                    " (loss gap to reference " + fmt("%.1e", gap) + "), worst " + worst_name};
}

// ---- 4. lens consistency ----

Outcome lens_consistency() {
  const auto pools = build_pools(401);
  const auto graphs = sample_graph_set({20, 20, 10}, pools, RelationVocab::standard(), 402);
  const auto& bank = TemplateBank::standard();
  const auto vocab = build_vocab(bank, pools);
  const auto suite = gen_suite(graphs, bank, 403);
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.d_model = 128;
  cfg.vocab_size = vocab.size();
  cfg.max_context = 128;
  const Model model(cfg, 404);
  auto prompts = probe_prompts(suite.items, vocab);
  Rng rng(405);
  rng.shuffle(prompts);
  prompts.resize(100);
  double worst = 0.0;
  for (const auto& p : prompts) {
    const double lens = probe_prompt(model, p).back().prob;
    const double gen = next_token_probs(model, p.ids)[static_cast<std::size_t>(p.gold)];
    worst = std::max(worst, std::abs(lens - gen));
  }
  return {worst <= 1e-6, "max |lens - generation| " + fmt("%.2e", worst) + " over 100 prompts"};
}

// ---- 5 and 6. desk memorization and order bias ----

ExperimentConfig desk_config(const std::string& name, const std::string& regime) {
  ConfigMap flags{{"profile", "desk"}, {"name", name},         {"runs_dir", (g_work / "runs").string()},
                  {"regime", regime},  {"strategy", "greedy"}, {"seed", "0"}};
  return load_run_config(flags, std::nullopt, false);
}

EvalReport desk_run(const std::string& name, const std::string& regime) {
  const auto cfg = desk_config(name, regime);
  fs::remove_all(run_path(cfg));
  apply_threads(cfg);
  gen_data(cfg);
  run_training(cfg, Stage::Pretrain);
  run_training(cfg, Stage::Sft);
  return run_eval(cfg, Stage::Sft);
}

std::map<std::string, EvalReport> g_desk;
double g_desk_seconds = 0.0;
constexpr double kDeskBudgetSeconds = 30 * 60;

const EvalReport& desk(const std::string& regime) {
  if (!g_desk.contains(regime)) {
    const auto t0 = std::chrono::steady_clock::now();
    g_desk[regime] = desk_run("desk_" + regime, regime);
    g_desk_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return g_desk.at(regime);
}

double logic_accuracy(const EvalReport& r, Direction d) {
  std::size_t c = 0, n = 0;
  for (const auto& [key, g] : r.groups)
    if (std::get<1>(key) == d && (std::get<0>(key) == Category::LogicInv || std::get<0>(key) == Category::LogicSym)) {
      c += g.correct;
      n += g.count;
    }
  return n ? static_cast<double>(c) / static_cast<double>(n) : 0.0;
}

Outcome desk_memorization() {
  const auto& r = desk("one_directional_people");
  const double rev = r.accuracy(Category::MemJob, Direction::Reverse);
  return {rev >= 0.60, "MemJob reverse " + fmt("%.3f", rev) + " (forward " +
                           fmt("%.3f", r.accuracy(Category::MemJob, Direction::Forward)) + ", MemPeople forward " +
                           fmt("%.3f", r.accuracy(Category::MemPeople, Direction::Forward)) + ", reverse " +
                           fmt("%.3f", r.accuracy(Category::MemPeople, Direction::Reverse)) + ")"};
}

Outcome order_bias() {
  const auto& one = desk("one_directional_people");
  const double lf = logic_accuracy(one, Direction::Forward), lr = logic_accuracy(one, Direction::Reverse);
  const bool logic_ok = lf < 0.5 || lf - lr >= 0.2;
  const auto& bi = desk("bidirectional_jobs");
  const double jf = bi.accuracy(Category::MemJob, Direction::Forward);
  const double jr = bi.accuracy(Category::MemJob, Direction::Reverse);
  const bool jobs_ok = std::abs(jf - jr) <= 0.10;
  const bool in_budget = g_desk_seconds <= kDeskBudgetSeconds;
  return {logic_ok && jobs_ok && in_budget, "one-directional Logic forward " + fmt("%.3f", lf) + " reverse " + fmt("%.3f", lr) +
                                   (lf < 0.5 ? " (premise not met)" : "") + "; bidirectional MemJob forward " +
                                   fmt("%.3f", jf) + " reverse " + fmt("%.3f", jr) + "; both regimes " +
                                   fmt("%.0f", g_desk_seconds) + "s of " + fmt("%.0f", kDeskBudgetSeconds) + "s"};
}

// ---- 7. diffusion ----

Outcome diffusion() {
  std::vector<std::string> failures;

  // Zero-mask sequences contribute nothing: an all-unmasked batch has zero
  // loss and gradient, and rewriting an unmasked packed sequence leaves a
  // real batch's loss unchanged.
  const auto pools = build_pools(701);
  const auto graphs = sample_graph_set({10, 4, 0}, pools, RelationVocab::standard(), 702);
  const auto& bank = TemplateBank::standard();
  const auto vocab = build_vocab(bank, pools);
  Rng rng(703);
  const auto dc = restructure_for_diffusion(build_pretrain_corpus(graphs, 2, bank, 704), rng);
  TrainConfig tc;
  tc.objective = Objective::Diffusion;
  tc.context = 128;
  tc.tokens_per_iteration = 128 * 4;
  tc.seed = 705;
  const DiffusionBatches batches(dc, vocab, tc);
  ModelConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.d_model = 32;
  mc.vocab_size = vocab.size();
  mc.max_context = 128;
  mc.attention = AttentionMode::Bidirectional;
  Model model(mc, 706);
  auto b = batches.batch(0, 0);
  const double base = batch_loss(model, b, 4, false);
  // Unmask segment 0 of row 0 and scramble its tokens.
  for (int t = 0; t < b.T && b.segments[static_cast<std::size_t>(t)] == 0; ++t) {
    const auto at = static_cast<std::size_t>(t);
    b.targets[at] = -1;
    b.weights[at] = 0.0f;
    b.inputs[at] = static_cast<TokenId>(Vocab::kNumSpecial + (t * 7) % 50);
  }
  auto stripped = batches.batch(0, 0);
  double removed = 0.0;
  {
    // Oracle: the masked-slot CE of segment 0 alone, from a single-row batch.
    Batch only = stripped;
    only.rows = 1;
    only.inputs.resize(static_cast<std::size_t>(b.T));
    only.targets.resize(static_cast<std::size_t>(b.T));
    only.weights.resize(static_cast<std::size_t>(b.T));
    only.segments.resize(static_cast<std::size_t>(b.T));
    only.positions.resize(static_cast<std::size_t>(b.T));
    for (int t = 0; t < b.T; ++t)
      if (only.segments[static_cast<std::size_t>(t)] != 0) {
        only.targets[static_cast<std::size_t>(t)] = -1;
        only.weights[static_cast<std::size_t>(t)] = 0.0f;
      }
    removed = batch_loss(model, only, 1, false);
  }
  const double after = batch_loss(model, b, 4, false);
  if (std::abs(base - removed - after) > 1e-4 * std::max(1.0, base)) failures.push_back("zero-mask sequence changed the loss");
  Batch none = b;
  std::fill(none.targets.begin(), none.targets.end(), -1);
  std::fill(none.weights.begin(), none.weights.end(), 0.0f);
  zero_grads(model.parameters());
  if (batch_loss(model, none, 4, true) != 0.0) failures.push_back("unmasked batch has nonzero loss");
  for (const auto& p : model.parameters())
    for (float g : p.tensor.grad_values())
      if (g != 0.0f) {
        failures.push_back("unmasked batch has nonzero gradient");
        break;
      }

  // Mask frequency.
  std::vector<std::uint8_t> eligible(100000, 1);
  double worst_freq = 0.0;
  for (float t : {0.05f, 0.3f, 0.5f, 0.9f}) {
    const auto d = draw_diffusion_mask_at(eligible, t, rng);
    double m = 0.0;
    for (auto v : d.mask) m += v;
    worst_freq = std::max(worst_freq, std::abs(m / 1e5 - t));
  }
  if (worst_freq > 0.005) failures.push_back("mask frequency off by " + fmt("%.4f", worst_freq));

  // Block decoding leaves no MASK.
  for (auto [block, rounds] : std::vector<std::pair<int, int>>{{1, 1}, {4, 2}, {3, 3}, {16, 4}}) {
    const std::vector<TokenId> prefix{Vocab::kBos, 10, 11}, suffix{12, Vocab::kEos};
    for (auto t : generate_diffusion(model, prefix, 9, suffix, {block, rounds}))
      if (t == Vocab::kMask) failures.push_back("MASK left after decoding");
  }

  // One-fact overfit answers both cloze directions.
  const std::string head = "Ana Bo Cu", tail = "Di Ef Gh", sentence = head + " is the father of " + tail + ".";
  const Vocab fact_vocab(Vocab::segment(sentence));
  DiffusionCorpus one;
  for (int i = 0; i < 16; ++i) one.documents.push_back({sentence, {sentence}, DiffusionRole::Raw, "g"});
  TrainConfig oc;
  oc.objective = Objective::Diffusion;
  oc.context = 16;
  oc.tokens_per_iteration = 16 * 16;
  oc.micro_batch_rows = 16;
  oc.max_lr = 3e-3f;
  oc.constant_lr = true;
  oc.weight_decay = 0.0f;
  oc.max_iterations = 300;
  oc.seed = 707;
  ModelConfig om;
  om.n_layers = 2;
  om.n_heads = 2;
  om.d_model = 32;
  om.vocab_size = fact_vocab.size();
  om.max_context = 16;
  om.attention = AttentionMode::Bidirectional;
  Model fact(om, 708);
  AdamW opt(AdamWConfig{0.9f, 0.999f, 1e-8f, 0.0f});
  TrainState st;
  train(fact, opt, DiffusionBatches(one, fact_vocab, oc), oc, st);
  auto ids = [&](const std::string& s) { return fact_vocab.encode(s); };
  std::vector<TokenId> fwd_prefix{Vocab::kBos};
  for (auto t : ids(head + " is the father of")) fwd_prefix.push_back(t);
  std::vector<TokenId> fwd_suffix = ids(".");
  fwd_suffix.push_back(Vocab::kEos);
  const auto fwd = fact_vocab.decode(generate_diffusion(fact, fwd_prefix, 3, fwd_suffix, {}));
  std::vector<TokenId> rev_suffix = ids("is the father of " + tail + ".");
  rev_suffix.push_back(Vocab::kEos);
  const auto rev = fact_vocab.decode(generate_diffusion(fact, std::vector<TokenId>{Vocab::kBos}, 3, rev_suffix, {}));
  if (fwd != tail) failures.push_back("forward cloze gave '" + fwd + "'");
  if (rev != head) failures.push_back("reverse cloze gave '" + rev + "'");

  std::string detail = "mask frequency max dev " + fmt("%.4f", worst_freq) + ", overfit forward '" + fwd +
                       "' reverse '" + rev + "'";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- 8. determinism ----

Outcome determinism() {
  // Same config text (relative runs_dir) from two working directories.
  std::vector<fs::path> dirs;
  const auto cwd = fs::current_path();
  for (const char* tag : {"det_a", "det_b"}) {
    fs::create_directories(g_work / tag);
    fs::current_path(g_work / tag);
    ConfigMap flags{{"profile", "desk"}, {"name", "det"},       {"runs_dir", "runs"},
                    {"threads", "1"},    {"max_iterations", "200"}, {"seed", "11"}};
    const auto cfg = load_run_config(flags, std::nullopt, false);
    fs::remove_all(run_path(cfg));
    apply_threads(cfg);
    gen_data(cfg);
    run_training(cfg, Stage::Pretrain);
    dirs.push_back(fs::absolute(run_path(cfg)));
    fs::current_path(cwd);
  }
  auto restore = desk_config("x", "one_directional_people");
  restore.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  apply_threads(restore);
  std::size_t compared = 0;
  std::vector<std::string> differ;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dirs[0]);
    if (rel == "timings.json") continue;  // wall-clock, kept out of the manifest on purpose
    ++compared;
    const auto other = dirs[1] / rel;
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) differ.push_back(rel.string());
  }
  const bool has_ckpt = fs::exists(dirs[0] / "model" / "pretrain.ckpt");
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& d : differ) detail += ", differs: " + d;
  return {differ.empty() && has_ckpt && compared > 5, detail};
}

// ---- 9. round trips ----

Outcome round_trips() {
  const auto pools = build_pools(901);
  const auto graphs = sample_graph_set({2000, 500, 0}, pools, RelationVocab::standard(), 902);
  const auto& bank = TemplateBank::standard();
  const auto vocab = build_vocab(bank, pools);
  const auto corpus = build_pretrain_corpus(graphs, 4, bank, 903);
  std::size_t docs = 0, tok_fail = 0;
  for (const auto& d : corpus.documents) {
    ++docs;
    if (vocab.decode(vocab.encode(d.text)) != d.text) ++tok_fail;
  }

  const SentenceParser parser(bank, pools);
  Rng rng(904);
  std::size_t paragraphs = 0, parse_fail = 0;
  auto key = [](const Triple& t) { return t.head + "|" + t.relation + "|" + t.tail; };
  for (std::size_t i = 0; paragraphs < 1000; ++i) {
    const auto& g = graphs.graphs[i];
    for (const auto& p : render_paragraphs(g, 4, bank, rng)) {
      std::multiset<std::string> got, want;
      for (const auto& t : parser.parse_paragraph(p.text)) got.insert(key(t));
      for (const auto& t : g.triples) want.insert(key(t));
      parse_fail += got != want;
      ++paragraphs;
    }
  }

  ModelConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.d_model = 128;
  mc.vocab_size = vocab.size();
  const Model model(mc, 905);
  std::stringstream ss;
  save_checkpoint(ss, model, {{"stage", "pretrain"}});
  const auto loaded = load_checkpoint(ss);
  const auto ids = vocab.encode(corpus.documents.front().text);
  const int T = std::min<int>(static_cast<int>(ids.size()), 64);
  const std::vector<TokenId> head(ids.begin(), ids.begin() + T);
  NoGradGuard guard;
  const auto a = model.forward(head, 1, T).logits, b = loaded.model.forward(head, 1, T).logits;
  const bool same = std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end());

  return {docs >= 10000 && tok_fail == 0 && parse_fail == 0 && same,
          std::to_string(docs) + " documents (" + std::to_string(tok_fail) + " tokenizer mismatches), " +
              std::to_string(paragraphs) + " paragraphs (" + std::to_string(parse_fail) +
              " parse mismatches), checkpoint forward " + (same ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::current_path() / "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc)
      g_work = argv[++i];
    else
      only.insert(std::stoi(a));
  }
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"corpus structure", corpus_structure}, {"query counts", query_counts},
      {"autodiff oracle", autodiff},          {"lens consistency", lens_consistency},
      {"desk memorization", desk_memorization}, {"order bias", order_bias},
      {"diffusion invariants", diffusion},    {"determinism", determinism},
      {"round trips", round_trips}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %-22s %s  %s [%.1fs]\n", n, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
