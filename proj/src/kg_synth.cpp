#include "relsem/kg_synth.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "relsem/error.hpp"

namespace relsem {

namespace detail {
extern const std::string_view kJobsText;
}

namespace {

constexpr std::array<std::string_view, 19> kOnsets = {
    "b", "d", "f", "g", "h", "j", "k", "l", "m", "n",
    "p", "r", "s", "t", "v", "z", "br", "tr", "st"};
constexpr std::array<std::string_view, 5> kVowels = {"a", "e", "i", "o", "u"};
constexpr std::array<std::string_view, 6> kCodas = {"", "n", "l", "r", "s", "m"};

// Capitalised words that templates or the QA wrapper already use.
const std::set<std::string, std::less<>> kReservedWords = {"Who", "What", "Q", "A"};

std::string make_pseudo_word(Rng& rng, int syllables) {
  std::string word;
  for (int s = 0; s < syllables; ++s) {
    word += kOnsets[rng.uniform_index(kOnsets.size())];
    word += kVowels[rng.uniform_index(kVowels.size())];
  }
  word += kCodas[rng.uniform_index(kCodas.size())];
  word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word;
}

std::vector<std::string> fill_pool(Rng& rng, int syllables, std::set<std::string>& taken) {
  std::vector<std::string> pool;
  pool.reserve(kPoolSize);
  while (static_cast<int>(pool.size()) < kPoolSize) {
    std::string word = make_pseudo_word(rng, syllables);
    if (kReservedWords.contains(word)) continue;
    if (!taken.insert(word).second) continue;
    pool.push_back(std::move(word));
  }
  return pool;
}

std::vector<std::string> parse_jobs(std::string_view text) {
  std::vector<std::string> jobs;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) jobs.push_back(line);
  }
  return jobs;
}

std::string sample_full_name(const EntityPools& pools, Rng& rng) {
  const auto& f = pools.first_names[rng.uniform_index(pools.first_names.size())];
  const auto& m = pools.middle_names[rng.uniform_index(pools.middle_names.size())];
  const auto& l = pools.last_names[rng.uniform_index(pools.last_names.size())];
  return f + " " + m + " " + l;
}

std::string issue_name(const EntityPools& pools, EntityRegistry& registry, Rng& rng) {
  for (int attempt = 0; attempt < kMaxNameRetries; ++attempt) {
    std::string name = sample_full_name(pools, rng);
    if (registry.try_register(name)) return name;
  }
  throw PoolExhausted("no unused full name after " + std::to_string(kMaxNameRetries) +
                      " draws (" + std::to_string(registry.size()) + " names issued)");
}

}  // namespace

const std::vector<std::string>& bundled_jobs() {
  static const std::vector<std::string> jobs = parse_jobs(detail::kJobsText);
  return jobs;
}

EntityPools build_pools(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x900150ULL}));
  std::set<std::string> taken;
  EntityPools pools;
  pools.first_names = fill_pool(rng, 2, taken);
  pools.middle_names = fill_pool(rng, 2, taken);
  pools.last_names = fill_pool(rng, 3, taken);
  pools.jobs = bundled_jobs();
  validate_pools(pools);
  return pools;
}

void validate_pools(const EntityPools& pools) {
  auto check_size = [](const std::vector<std::string>& v, std::size_t n, const char* what) {
    if (v.size() != n)
      throw FormatError(std::string(what) + " pool has " + std::to_string(v.size()) +
                        " entries, expected " + std::to_string(n));
  };
  check_size(pools.first_names, kPoolSize, "first-name");
  check_size(pools.middle_names, kPoolSize, "middle-name");
  check_size(pools.last_names, kPoolSize, "last-name");
  check_size(pools.jobs, kJobCount, "job");

  std::set<std::string> seen;
  for (const auto* pool : {&pools.first_names, &pools.middle_names, &pools.last_names}) {
    for (const auto& name : *pool) {
      if (!seen.insert(name).second) throw FormatError("name part '" + name + "' repeated");
      if (name.find(' ') != std::string::npos) throw FormatError("name part contains a space");
    }
  }
  std::set<std::string> jobs;
  for (const auto& job : pools.jobs) {
    if (!jobs.insert(job).second) throw FormatError("job '" + job + "' repeated");
    for (char c : job)
      if (std::isupper(static_cast<unsigned char>(c))) throw FormatError("job '" + job + "' not lowercase");
  }
}

const RelationVocab& RelationVocab::standard() {
  static const RelationVocab vocab{
      {{{"father", "son"}, {"husband", "wife"}, {"uncle", "niece"}}},
      {{"friend", "brother", "spouse"}},
      "job",
  };
  return vocab;
}

bool RelationVocab::is_symmetric(std::string_view relation) const {
  return std::ranges::find(symmetric_relations, relation) != symmetric_relations.end();
}

bool RelationVocab::is_person_relation(std::string_view relation) const {
  if (is_symmetric(relation)) return true;
  return std::ranges::any_of(inversion_pairs, [&](const auto& p) {
    return p.first == relation || p.second == relation;
  });
}

std::string RelationVocab::inverse_of(std::string_view relation) const {
  if (is_symmetric(relation)) return std::string(relation);
  for (const auto& [r, inv] : inversion_pairs) {
    if (r == relation) return inv;
    if (inv == relation) return r;
  }
  throw FormatError("relation '" + std::string(relation) + "' has no inverse");
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Train: return "train";
    case GraphKind::Evaluation: return "eval";
    case GraphKind::Icl: return "icl";
  }
  return "?";
}

GraphKind parse_graph_kind(std::string_view text) {
  if (text == "train") return GraphKind::Train;
  if (text == "eval") return GraphKind::Evaluation;
  if (text == "icl") return GraphKind::Icl;
  throw FormatError("unknown graph kind '" + std::string(text) + "'");
}

const Triple* Graph::find(int canonical_index) const {
  for (const auto& t : triples)
    if (t.canonical_index == canonical_index) return &t;
  return nullptr;
}

std::vector<int> canonical_indices(GraphKind kind) {
  switch (kind) {
    case GraphKind::Train: return {1, 2, 3, 4, 5, 6, 7};
    case GraphKind::Evaluation: return {1, 3, 5, 6, 7};
    case GraphKind::Icl: return {1, 3};
  }
  return {};
}

Graph sample_graph(const EntityPools& pools, const RelationVocab& vocab, GraphKind kind,
                   EntityRegistry& registry, Rng& rng, std::string id) {
  Graph g;
  g.id = std::move(id);
  g.kind = kind;
  for (auto& p : g.persons) p = issue_name(pools, registry, rng);
  g.inversion_choice = rng.uniform_int(1, 3);
  g.symmetry_choice = rng.uniform_int(1, 3);
  if (kind != GraphKind::Icl) {
    for (int i = 0; i < 3; ++i) g.jobs.push_back(pools.jobs[rng.uniform_index(pools.jobs.size())]);
  }

  const auto& [rel, inv] = vocab.inversion_pairs[g.inversion_choice - 1];
  const auto& sym = vocab.symmetric_relations[g.symmetry_choice - 1];
  const auto& [e1, e2, e3] = g.persons;

  // Full seven-triple schema; each kind keeps a subset of canonical indices.
  std::array<Triple, 7> schema = {{
      {e1, rel, e2, 1},
      {e2, inv, e1, 2},
      {e2, sym, e3, 3},
      {e3, sym, e2, 4},
      {e1, vocab.attribute_relation, "", 5},
      {e2, vocab.attribute_relation, "", 6},
      {e3, vocab.attribute_relation, "", 7},
  }};
  for (const int idx : canonical_indices(kind)) {
    Triple t = schema[idx - 1];
    if (idx >= 5) t.tail = g.jobs[idx - 5];
    g.triples.push_back(std::move(t));
  }
  return g;
}

std::vector<const Graph*> GraphSet::of_kind(GraphKind kind) const {
  std::vector<const Graph*> out;
  for (const auto& g : graphs)
    if (g.kind == kind) out.push_back(&g);
  return out;
}

const Graph* GraphSet::find(std::string_view id) const {
  for (const auto& g : graphs)
    if (g.id == id) return &g;
  return nullptr;
}

GraphSet sample_graph_set(const GraphCounts& counts, const EntityPools& pools,
                          const RelationVocab& vocab, std::uint64_t seed) {
  if (counts.train < 0 || counts.eval < 0 || counts.icl < 0)
    throw ConfigError("graph counts must be non-negative");
  Rng rng(derive_seed(seed, {0x6A4FULL}));
  EntityRegistry registry;
  GraphSet set;
  set.graphs.reserve(static_cast<std::size_t>(counts.train + counts.eval + counts.icl));
  auto emit = [&](GraphKind kind, int n) {
    for (int i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05d", std::string(to_string(kind)).c_str(), i);
      set.graphs.push_back(sample_graph(pools, vocab, kind, registry, rng, id));
    }
  };
  emit(GraphKind::Train, counts.train);
  emit(GraphKind::Evaluation, counts.eval);
  emit(GraphKind::Icl, counts.icl);
  return set;
}

namespace {
constexpr std::string_view kGraphSetFormat = "relsem.graphset";
constexpr int kGraphSetVersion = 1;
}  // namespace

void write_graph_set(const GraphSet& set, std::ostream& out) {
  nlohmann::ordered_json header = {{"format", kGraphSetFormat}, {"version", kGraphSetVersion},
                                   {"count", set.graphs.size()}};
  out << header.dump() << '\n';
  for (const auto& g : set.graphs) {
    nlohmann::ordered_json rec;
    rec["id"] = g.id;
    rec["kind"] = to_string(g.kind);
    rec["persons"] = g.persons;
    rec["jobs"] = g.jobs;
    rec["k"] = g.inversion_choice;
    rec["l"] = g.symmetry_choice;
    auto triples = nlohmann::ordered_json::array();
    for (const auto& t : g.triples)
      triples.push_back({{"i", t.canonical_index}, {"h", t.head}, {"r", t.relation}, {"t", t.tail}});
    rec["triples"] = std::move(triples);
    out << rec.dump() << '\n';
  }
}

GraphSet read_graph_set(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("graph set: missing header");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != kGraphSetFormat || header.value("version", 0) != kGraphSetVersion)
    throw FormatError("graph set: unsupported header " + line);
  GraphSet set;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Graph g;
    g.id = rec.at("id").get<std::string>();
    g.kind = parse_graph_kind(rec.at("kind").get<std::string>());
    g.persons = rec.at("persons").get<std::array<std::string, 3>>();
    g.jobs = rec.at("jobs").get<std::vector<std::string>>();
    g.inversion_choice = rec.at("k").get<int>();
    g.symmetry_choice = rec.at("l").get<int>();
    for (const auto& t : rec.at("triples"))
      g.triples.push_back({t.at("h").get<std::string>(), t.at("r").get<std::string>(),
                           t.at("t").get<std::string>(), t.at("i").get<int>()});
    set.graphs.push_back(std::move(g));
  }
  if (set.graphs.size() != header.value("count", set.graphs.size()))
    throw FormatError("graph set: record count does not match header");
  return set;
}

}  // namespace relsem
