#include <algorithm>
#include <set>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/inference.hpp"
#include "relsem/svg.hpp"

namespace relsem {

namespace {

bool parse_number(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

struct Family {
  const char* name;
  std::vector<Category> categories;
};

const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"memorize", {Category::MemPeople, Category::MemJob}},
      {"logic", {Category::LogicInv, Category::LogicSym}},
      {"icl", {Category::IclCompInv, Category::IclCompSym, Category::IclQaInv, Category::IclQaSym}},
  };
  return f;
}

}  // namespace

SweepResult sweep_report(const std::vector<SweepRun>& runs) {
  if (runs.size() < 2) throw AxisMismatch("a sweep needs at least two runs");
  std::set<std::string> keys;
  for (const auto& r : runs)
    for (const auto& [k, v] : r.axes) keys.insert(k);
  std::vector<std::string> varying;
  for (const auto& k : keys) {
    std::set<std::string> values;
    for (const auto& r : runs) {
      auto it = r.axes.find(k);
      values.insert(it == r.axes.end() ? std::string("<unset>") : it->second);
    }
    if (values.size() > 1) varying.push_back(k);
  }
  if (varying.size() != 1) {
    std::string list;
    for (const auto& k : varying) list += (list.empty() ? "" : ", ") + k;
    throw AxisMismatch("runs must differ on exactly one axis; they differ on " +
                       (varying.empty() ? std::string("none") : list));
  }

  SweepResult result;
  result.axis = varying.front();
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  bool numeric = true;
  std::vector<double> xs(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) numeric = numeric && parse_number(runs[i].axes.at(result.axis), xs[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return numeric ? xs[a] < xs[b] : runs[a].axes.at(result.axis) < runs[b].axes.at(result.axis);
  });

  std::ostringstream csv;
  csv << "axis,value,category,direction,mode,accuracy,count\n";
  for (auto i : order)
    for (const auto& [key, g] : runs[i].report.groups)
      csv << result.axis << ',' << runs[i].axes.at(result.axis) << ',' << to_string(std::get<0>(key)) << ','
          << to_string(std::get<1>(key)) << ',' << to_string(std::get<2>(key)) << ',' << g.accuracy() << ','
          << g.count << '\n';
  result.csv = csv.str();

  std::vector<std::string> ticks;
  std::vector<double> x;
  for (std::size_t j = 0; j < order.size(); ++j) {
    ticks.push_back(runs[order[j]].axes.at(result.axis));
    x.push_back(numeric ? xs[order[j]] : static_cast<double>(j));
  }
  std::size_t color = 0;
  for (const auto& fam : families()) {
    svg::Chart chart{fam.name, result.axis, "accuracy", false, ticks, {}};
    for (auto c : fam.categories) {
      bool any = false;
      for (auto d : {Direction::Forward, Direction::Reverse}) {
        svg::Series s{std::string(to_string(c)) + " " + std::string(to_string(d)), svg::palette(color),
                      d == Direction::Reverse, {}, {}};
        std::string crossed;
        for (std::size_t j = 0; j < order.size(); ++j) {
          const auto& rep = runs[order[j]].report;
          if (!rep.has(c, d)) continue;
          const double acc = rep.accuracy(c, d);
          s.x.push_back(x[j]);
          s.y.push_back(acc);
          if (crossed.empty() && acc >= 0.5) crossed = ticks[j];
        }
        if (s.x.empty()) continue;
        any = true;
        if (c == Category::IclCompInv || c == Category::IclCompSym)
          result.transitions[s.name] = crossed.empty() ? "none" : crossed;
        chart.series.push_back(std::move(s));
      }
      if (any) ++color;
    }
    if (!chart.series.empty()) result.svgs[fam.name] = svg::render({chart});
  }
  return result;
}

}  // namespace relsem
