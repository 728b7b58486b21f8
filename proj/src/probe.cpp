#include "relsem/probe.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/inference.hpp"
#include "relsem/ops.hpp"
#include "relsem/svg.hpp"

namespace relsem {

namespace {

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

}  // namespace

LensReadout read_lens(std::span<const float> logits, TokenId gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= logits.size())
    throw ShapeMismatch("gold token " + std::to_string(gold) + " outside vocab");
  const float g = logits[static_cast<std::size_t>(gold)];
  const float mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  std::int64_t rank = 1;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    sum += std::exp(static_cast<double>(logits[j]) - mx);
    if (logits[j] > g || (logits[j] == g && static_cast<TokenId>(j) < gold)) ++rank;
  }
  return {g, std::exp(static_cast<double>(g) - mx) / sum, rank};
}

std::vector<LensReadout> probe_prompt(const Model& model, const ProbePrompt& prompt) {
  if (prompt.ids.empty()) throw EmptyPromptSet("probe prompt has no tokens");
  NoGradGuard guard;
  ForwardOptions opt;
  opt.taps = true;
  const std::int64_t last = static_cast<std::int64_t>(prompt.ids.size()) - 1;
  opt.logit_rows = std::span(&last, 1);
  const auto out = model.forward(prompt.ids, 1, static_cast<int>(prompt.ids.size()), opt);
  std::vector<LensReadout> r;
  for (const auto& tap : out.taps) {
    const Tensor logits = model.decode(ops::gather_rows(tap, std::span(&last, 1)));
    r.push_back(read_lens(logits.values(), prompt.gold));
  }
  return r;
}

std::vector<LayerProbeRecord> probe_layers(const Model& model, std::span<const ProbePrompt> prompts) {
  if (prompts.empty()) throw EmptyPromptSet("probe needs at least one prompt");
  const auto n = prompts.size();
  const auto layers = static_cast<std::size_t>(model.config().n_layers) + 1;
  std::vector<std::vector<LensReadout>> all(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    try {
      all[static_cast<std::size_t>(i)] = probe_prompt(model, prompts[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ShapeMismatch("probe: " + e);

  std::vector<LayerProbeRecord> records;
  std::vector<double> logit(n), prob(n), rank(n);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      logit[i] = all[i][l].logit;
      prob[i] = all[i][l].prob;
      rank[i] = static_cast<double>(all[i][l].rank);
    }
    const double dn = static_cast<double>(n);
    records.push_back({static_cast<int>(l), pairwise_sum(logit.data(), n) / dn, pairwise_sum(prob.data(), n) / dn,
                       pairwise_sum(rank.data(), n) / dn, n});
  }
  return records;
}

std::vector<ProbePrompt> probe_prompts(std::span<const QueryItem> items, const Vocab& vocab) {
  std::vector<ProbePrompt> out;
  out.reserve(items.size());
  for (const auto& q : items) {
    const auto gold = vocab.encode(q.gold);
    if (gold.empty()) throw EmptyPromptSet("query with an empty gold answer: " + q.prompt);
    out.push_back({query_prompt_ids(q, vocab), gold.front()});
  }
  return out;
}

void write_probe_csv(const std::vector<LayerProbeRecord>& records, const std::string& category, std::ostream& out) {
  out << "layer,metric,value,n_prompts,category\n";
  out.precision(10);
  for (const auto& r : records) {
    out << r.layer << ",logit," << r.mean_logit << ',' << r.n_prompts << ',' << category << '\n';
    out << r.layer << ",prob," << r.mean_prob << ',' << r.n_prompts << ',' << category << '\n';
    out << r.layer << ",rank," << r.mean_rank << ',' << r.n_prompts << ',' << category << '\n';
  }
}

std::vector<ProbeCsvRow> read_probe_csv(std::istream& in) {
  std::vector<ProbeCsvRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "layer,metric,value,n_prompts,category")
    throw FormatError("probe CSV header missing");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (auto& x : f)
      if (!std::getline(ls, x, ',')) throw FormatError("probe CSV row has fewer than 5 fields: " + line);
    try {
      rows.push_back({std::stoi(f[0]), f[1], std::stod(f[2]), static_cast<std::size_t>(std::stoull(f[3])), f[4]});
    } catch (const std::exception&) {
      throw FormatError("bad probe CSV row: " + line);
    }
  }
  return rows;
}

std::string probe_svg(const std::vector<ProbeCsvRow>& rows) {
  std::vector<std::string> categories;
  for (const auto& r : rows)
    if (std::find(categories.begin(), categories.end(), r.category) == categories.end())
      categories.push_back(r.category);
  std::vector<svg::Chart> panels;
  for (const auto& [metric, label] : {std::pair{"logit", "mean logit"}, std::pair{"prob", "mean probability"},
                                      std::pair{"rank", "mean rank"}}) {
    svg::Chart c{label, "layer", metric, std::string(metric) == "rank", {}, {}};
    for (std::size_t k = 0; k < categories.size(); ++k) {
      svg::Series s{categories[k], svg::palette(k), false, {}, {}};
      std::map<int, double> by_layer;
      for (const auto& r : rows)
        if (r.category == categories[k] && r.metric == metric) by_layer[r.layer] = r.value;
      for (const auto& [l, v] : by_layer) {
        s.x.push_back(l);
        s.y.push_back(v);
      }
      if (!s.x.empty()) c.series.push_back(std::move(s));
    }
    panels.push_back(std::move(c));
  }
  return svg::render(panels);
}

}  // namespace relsem
