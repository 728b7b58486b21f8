#include <istream>
#include <ostream>

#include <json.hpp>

#include "relsem/error.hpp"
#include "relsem/inference.hpp"
#include "relsem/kernels.hpp"
#include "relsem/training.hpp"

namespace relsem {

double EvalReport::accuracy(Category c, Direction d) const {
  std::size_t correct = 0;
  std::size_t count = 0;
  for (const auto& [key, g] : groups)
    if (std::get<0>(key) == c && std::get<1>(key) == d) {
      correct += g.correct;
      count += g.count;
    }
  if (count == 0)
    throw ConfigError("report has no " + std::string(to_string(c)) + "/" + std::string(to_string(d)) + " items");
  return static_cast<double>(correct) / static_cast<double>(count);
}

bool EvalReport::has(Category c, Direction d) const {
  for (const auto& [key, g] : groups)
    if (std::get<0>(key) == c && std::get<1>(key) == d && g.count > 0) return true;
  return false;
}

std::map<std::string, double> EvalReport::metrics() const {
  std::map<std::string, double> out;
  for (auto c : kAllCategories)
    for (auto d : {Direction::Forward, Direction::Reverse})
      if (has(c, d)) out[std::string(to_string(c)) + "/" + std::string(to_string(d))] = accuracy(c, d);
  return out;
}

std::vector<TokenId> query_prompt_ids(const QueryItem& item, const Vocab& vocab) {
  std::vector<TokenId> ids{Vocab::kBos};
  const auto body = vocab.encode(item.mode == QueryMode::Qa ? qa_prompt(item.prompt) : item.prompt);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

std::string answer_query(const Model& model, const Vocab& vocab, const QueryItem& item, const ScoreConfig& cfg,
                         std::uint64_t item_index) {
  const auto prompt = query_prompt_ids(item, vocab);
  std::vector<TokenId> out;
  if (model.config().attention == AttentionMode::Causal) {
    Rng rng(derive_seed(cfg.seed, {0x6E17, item_index}));
    out = generate_ar(model, vocab, prompt, cfg.gen, rng);
  } else {
    // A completion prompt is a sentence prefix; its answer closes the sentence.
    auto suffix = vocab.encode(item.suffix.empty() && item.mode == QueryMode::Completion ? "." : item.suffix);
    suffix.push_back(Vocab::kEos);
    const auto gold_len = static_cast<int>(vocab.encode(item.gold).size());
    out = generate_diffusion(model, prompt, gold_len, suffix, cfg.diffusion);
  }
  return vocab.decode(out);
}

EvalReport score_items(const Model& model, const Vocab& vocab, std::span<const QueryItem> items,
                       const ScoreConfig& cfg) {
  kernels::flush_subnormals();
  std::vector<std::string> outputs(items.size());
  std::vector<std::string> errors(items.size());
  const auto n = static_cast<std::int64_t>(items.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      outputs[static_cast<std::size_t>(i)] =
          answer_query(model, vocab, items[static_cast<std::size_t>(i)], cfg, static_cast<std::uint64_t>(i));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!errors[i].empty()) throw ConfigError("scoring item " + std::to_string(i) + ": " + errors[i]);

  EvalReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& q = items[i];
    auto& g = report.groups[{q.category, q.direction, q.mode}];
    ++g.count;
    if (normalize_answer(outputs[i]) == normalize_answer(q.gold)) {
      ++g.correct;
    } else if (g.failures.size() < cfg.max_failures) {
      g.failures.push_back({q.prompt, q.gold, outputs[i]});
    }
  }
  return report;
}

void write_report_json(const EvalReport& report, std::ostream& out) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& [key, g] : report.groups) {
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& f : g.failures) failures.push_back({{"prompt", f.prompt}, {"gold", f.gold}, {"output", f.output}});
    groups.push_back({{"category", to_string(std::get<0>(key))},
                      {"direction", to_string(std::get<1>(key))},
                      {"mode", to_string(std::get<2>(key))},
                      {"correct", g.correct},
                      {"count", g.count},
                      {"accuracy", g.accuracy()},
                      {"failures", failures}});
  }
  out << nlohmann::ordered_json{{"groups", groups}}.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
  EvalReport report;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& g : doc.at("groups")) {
      GroupResult r;
      r.correct = g.at("correct").get<std::size_t>();
      r.count = g.at("count").get<std::size_t>();
      for (const auto& f : g.value("failures", nlohmann::json::array()))
        r.failures.push_back({f.at("prompt"), f.at("gold"), f.at("output")});
      report.groups[{parse_category(g.at("category").get<std::string>()),
                     parse_direction(g.at("direction").get<std::string>()),
                     parse_query_mode(g.at("mode").get<std::string>())}] = std::move(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report: ") + e.what());
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "category,direction,mode,correct,count,accuracy\n";
  for (const auto& [key, g] : report.groups)
    out << to_string(std::get<0>(key)) << ',' << to_string(std::get<1>(key)) << ',' << to_string(std::get<2>(key))
        << ',' << g.correct << ',' << g.count << ',' << g.accuracy() << '\n';
}

}  // namespace relsem
