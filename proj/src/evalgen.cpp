#include "relsem/evalgen.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "relsem/error.hpp"

namespace relsem {

namespace {

constexpr std::array<std::string_view, 8> kCategoryNames = {
    "mem_people", "mem_job", "logic_inv", "logic_sym", "icl_comp_inv", "icl_comp_sym", "icl_qa_inv", "icl_qa_sym"};

constexpr std::array<TemplateFamily, 8> kFamilies = {
    TemplateFamily::PeopleSentence,        TemplateFamily::JobSentence,
    TemplateFamily::PeopleQuestionReverse, TemplateFamily::PeopleQuestionForward,
    TemplateFamily::JobQuestionReverse,    TemplateFamily::JobQuestionForward,
    TemplateFamily::IclCompletionReverse,  TemplateFamily::IclCompletionForward};

TemplateFamily parse_family(std::string_view text) {
  for (auto f : kFamilies)
    if (to_string(f) == text) return f;
  throw FormatError("unknown template family '" + std::string(text) + "'");
}

std::uint64_t stream_id(Category c, Direction d, QueryMode m) {
  return static_cast<std::uint64_t>(c) * 16 + static_cast<std::uint64_t>(d) * 4 + static_cast<std::uint64_t>(m);
}

// Runs `fn(graph, rng, out)` for every graph of `kind`, each on its own child
// stream, and concatenates results in graph order.
template <typename Fn>
std::vector<QueryItem> per_graph(const GraphSet& graphs, GraphKind kind, std::uint64_t seed, Fn fn) {
  const auto selected = graphs.of_kind(kind);
  std::vector<std::vector<QueryItem>> parts(selected.size());
  const Rng root(seed);
  const auto n = static_cast<std::int64_t>(selected.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const Graph& g = *selected[static_cast<std::size_t>(i)];
    Rng rng = root.child({hash_string(g.id)});
    fn(g, rng, parts[static_cast<std::size_t>(i)]);
  }
  std::vector<QueryItem> out;
  for (auto& p : parts) std::ranges::move(p, std::back_inserter(out));
  return out;
}

QueryItem base_item(Rng& rng, const Graph& g, const Triple& reference, Direction dir, Category cat) {
  // Forward conditions on the reference head; reverse on its tail.
  const bool forward = dir == Direction::Forward;
  QueryItem q;
  q.category = cat;
  q.direction = dir;
  q.mode = QueryMode::Qa;
  q.graph_id = g.id;
  q.reference_fact = reference;
  q.conditioned = forward ? ConditionedRole::Head : ConditionedRole::Tail;
  q.template_index = rng.uniform_int(1, 4);
  return q;
}

}  // namespace

std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(QueryMode m) { return m == QueryMode::Completion ? "completion" : "qa"; }

Category parse_category(std::string_view text) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
    if (kCategoryNames[i] == text) return static_cast<Category>(i);
  throw FormatError("unknown category '" + std::string(text) + "'");
}

QueryMode parse_query_mode(std::string_view text) {
  if (text == "completion") return QueryMode::Completion;
  if (text == "qa") return QueryMode::Qa;
  throw FormatError("unknown query mode '" + std::string(text) + "'");
}

std::map<GroupKey, std::size_t> QuerySuite::counts() const {
  std::map<GroupKey, std::size_t> out;
  for (const auto& q : items) ++out[{q.category, q.direction}];
  return out;
}

std::vector<const QueryItem*> QuerySuite::select(Category c, Direction d) const {
  std::vector<const QueryItem*> out;
  for (const auto& q : items)
    if (q.category == c && q.direction == d) out.push_back(&q);
  return out;
}

namespace {

// Question about `reference` asking for relation `asked`: forward uses the
// reverse-question family on the head, reverse the forward-question family on the tail.
void fill_people_question(QueryItem& q, const TemplateBank& bank, const std::string& asked) {
  const bool forward = q.direction == Direction::Forward;
  q.template_family = forward ? TemplateFamily::PeopleQuestionReverse : TemplateFamily::PeopleQuestionForward;
  const auto& subject = forward ? q.reference_fact.head : q.reference_fact.tail;
  q.prompt = TemplateBank::render(bank.get(q.template_family, q.template_index),
                                  {{"person", subject}, {"relationship", asked}});
  q.gold = forward ? q.reference_fact.tail : q.reference_fact.head;
}

}  // namespace

std::vector<QueryItem> gen_memorize_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                            std::uint64_t seed) {
  const auto& vocab = RelationVocab::standard();
  const std::uint64_t s = derive_seed(seed, {stream_id(Category::MemPeople, dir, QueryMode::Qa)});
  return per_graph(graphs, GraphKind::Evaluation, s, [&](const Graph& g, Rng& rng, std::vector<QueryItem>& out) {
    for (int idx : {1, 3}) {
      const Triple* t = g.find(idx);
      if (!t) continue;
      // A memorize question restates the stated fact, so the asked relation
      // is the one in the reference: "Who is the r of B?" / "A is the r of who?".
      QueryItem q = base_item(rng, g, *t, dir, Category::MemPeople);
      const bool forward = dir == Direction::Forward;
      q.template_family = forward ? TemplateFamily::PeopleQuestionForward : TemplateFamily::PeopleQuestionReverse;
      q.prompt = TemplateBank::render(bank.get(q.template_family, q.template_index),
                                      {{"person", forward ? t->head : t->tail}, {"relationship", t->relation}});
      q.gold = forward ? t->tail : t->head;
      out.push_back(std::move(q));
    }
    for (int idx : {5, 6, 7}) {
      const Triple* t = g.find(idx);
      if (!t || t->relation != vocab.attribute_relation) continue;
      QueryItem q = base_item(rng, g, *t, dir, Category::MemJob);
      q.conditioned = ConditionedRole::Head;
      q.template_family =
          dir == Direction::Forward ? TemplateFamily::JobQuestionForward : TemplateFamily::JobQuestionReverse;
      q.prompt = TemplateBank::render(bank.get(q.template_family, q.template_index), {{"person", t->head}});
      q.gold = t->tail;
      out.push_back(std::move(q));
    }
  });
}

std::vector<QueryItem> gen_logic_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                         std::uint64_t seed) {
  const auto& vocab = RelationVocab::standard();
  const std::uint64_t s = derive_seed(seed, {stream_id(Category::LogicInv, dir, QueryMode::Qa)});
  return per_graph(graphs, GraphKind::Evaluation, s, [&](const Graph& g, Rng& rng, std::vector<QueryItem>& out) {
    for (const auto& [idx, cat] : {std::pair{1, Category::LogicInv}, std::pair{3, Category::LogicSym}}) {
      const Triple* t = g.find(idx);
      if (!t) continue;
      const auto asked = vocab.inverse_of(t->relation);
      QueryItem q = base_item(rng, g, *t, dir, cat);
      fill_people_question(q, bank, asked);
      out.push_back(std::move(q));
    }
  });
}

std::vector<QueryItem> gen_icl_queries(const GraphSet& graphs, const TemplateBank& bank, QueryMode mode,
                                       Direction dir, std::uint64_t seed, const IclYield& yield) {
  const auto& vocab = RelationVocab::standard();
  if (yield.templates < 1 || yield.templates > bank.size(TemplateFamily::IclCompletionReverse))
    throw ConfigError("ICL template count out of range");
  if (yield.inversion_orderings < 1 || yield.inversion_orderings > 2 || yield.symmetry_orderings < 1 ||
      yield.symmetry_orderings > 2)
    throw ConfigError("ICL orderings must be 1 or 2");
  const Category inv_cat = mode == QueryMode::Completion ? Category::IclCompInv : Category::IclQaInv;
  const Category sym_cat = mode == QueryMode::Completion ? Category::IclCompSym : Category::IclQaSym;
  const std::uint64_t s = derive_seed(seed, {stream_id(inv_cat, dir, mode)});
  const bool forward = dir == Direction::Forward;

  return per_graph(graphs, GraphKind::Icl, s, [&](const Graph& g, Rng& rng, std::vector<QueryItem>& out) {
    auto emit = [&](const Triple& stated, Category cat) {
      const auto rev = vocab.inverse_of(stated.relation);
      for (int t = 1; t <= yield.templates; ++t) {
        QueryItem q;
        q.category = cat;
        q.direction = dir;
        q.mode = mode;
        q.graph_id = g.id;
        q.reference_fact = stated;
        q.conditioned = forward ? ConditionedRole::Head : ConditionedRole::Tail;
        if (mode == QueryMode::Completion) {
          q.template_family = forward ? TemplateFamily::IclCompletionForward : TemplateFamily::IclCompletionReverse;
          q.template_index = t;
          q.prompt = TemplateBank::render(bank.get(q.template_family, t),
                                          {{"person_a", stated.head},
                                           {"person_b", stated.tail},
                                           {"relationship", stated.relation},
                                           {"reverse_relationship", rev}});
          q.gold = forward ? stated.tail : stated.head;
        } else {
          const auto context = render_with(
              bank.get(TemplateFamily::PeopleSentence, bank.icl_stated_format(t)), stated, vocab);
          q.template_index = rng.uniform_int(1, 4);
          fill_people_question(q, bank, rev);
          q.prompt = context + " " + q.prompt;
        }
        out.push_back(std::move(q));
      }
    };
    if (const Triple* t = g.find(1)) {
      emit(*t, inv_cat);
      if (yield.inversion_orderings == 2) emit({t->tail, vocab.inverse_of(t->relation), t->head, 2}, inv_cat);
    }
    if (const Triple* t = g.find(3)) {
      emit(*t, sym_cat);
      if (yield.symmetry_orderings == 2) emit({t->tail, t->relation, t->head, 4}, sym_cat);
    }
  });
}

QuerySuite gen_suite(const GraphSet& graphs, const TemplateBank& bank, std::uint64_t seed,
                     const SuiteConfig& config) {
  QuerySuite suite;
  auto append = [&](std::vector<QueryItem> items) { std::ranges::move(items, std::back_inserter(suite.items)); };
  for (const Direction dir : {Direction::Forward, Direction::Reverse}) {
    if (config.include_memorize) append(gen_memorize_queries(graphs, bank, dir, seed));
    if (config.include_logic) append(gen_logic_queries(graphs, bank, dir, seed));
    if (config.include_icl) {
      append(gen_icl_queries(graphs, bank, QueryMode::Completion, dir, seed, config.icl));
      append(gen_icl_queries(graphs, bank, QueryMode::Qa, dir, seed, config.icl));
    }
  }
  return suite;
}

std::vector<QueryItem> gen_cloze_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                         std::uint64_t seed) {
  static const std::string kSlot = "\x01";
  const std::uint64_t s = derive_seed(seed, {0xC102E, static_cast<std::uint64_t>(dir)});
  const bool forward = dir == Direction::Forward;
  return per_graph(graphs, GraphKind::Evaluation, s, [&](const Graph& g, Rng& rng, std::vector<QueryItem>& out) {
    for (int idx : {1, 3}) {
      const Triple* t = g.find(idx);
      if (!t) continue;
      QueryItem q;
      q.category = Category::MemPeople;
      q.direction = dir;
      q.mode = QueryMode::Completion;
      q.graph_id = g.id;
      q.reference_fact = *t;
      q.conditioned = forward ? ConditionedRole::Head : ConditionedRole::Tail;
      q.template_family = TemplateFamily::PeopleSentence;
      q.template_index = rng.uniform_int(1, 4);
      const auto text = TemplateBank::render(bank.get(q.template_family, q.template_index),
                                             {{"person_a", forward ? t->head : kSlot},
                                              {"person_b", forward ? kSlot : t->tail},
                                              {"relationship", t->relation}});
      const auto cut = text.find(kSlot);
      q.prompt = text.substr(0, cut);
      q.suffix = text.substr(cut + kSlot.size());
      while (!q.prompt.empty() && q.prompt.back() == ' ') q.prompt.pop_back();
      while (!q.suffix.empty() && q.suffix.front() == ' ') q.suffix.erase(0, 1);
      q.gold = forward ? t->tail : t->head;
      out.push_back(std::move(q));
    }
  });
}

void check_icl_leak(const GraphSet& graphs, const Corpus& corpus) {
  std::unordered_set<std::string> names;
  for (const auto* g : graphs.of_kind(GraphKind::Icl))
    for (const auto& p : g->persons) names.insert(p);
  if (names.empty()) return;
  for (const auto& doc : corpus.documents) {
    std::vector<std::string> words;
    std::istringstream in(doc.text);
    std::string w;
    while (in >> w) {
      while (!w.empty() && (w.back() == '.' || w.back() == ',' || w.back() == '?')) w.pop_back();
      if (w.size() > 2 && w.ends_with("'s")) w.resize(w.size() - 2);
      words.push_back(std::move(w));
    }
    for (std::size_t i = 0; i + 2 < words.size(); ++i) {
      const auto candidate = words[i] + " " + words[i + 1] + " " + words[i + 2];
      if (names.contains(candidate))
        throw EntityLeak("ICL entity '" + candidate + "' appears in corpus document of " + doc.graph_id);
    }
  }
}

std::size_t count_withheld_violations(const QuerySuite& suite, const Corpus& corpus, const TemplateBank& bank) {
  const auto& vocab = RelationVocab::standard();
  std::unordered_set<std::string> sentences;
  for (const auto& d : corpus.documents)
    if (d.role == ContentRole::Eval) sentences.insert(d.sentences.begin(), d.sentences.end());
  std::size_t violations = 0;
  for (const auto& q : suite.items) {
    if (q.category != Category::LogicInv && q.category != Category::LogicSym) continue;
    const auto& r = q.reference_fact;
    const Triple implied{r.tail, vocab.inverse_of(r.relation), r.head, 0};
    for (int tau = 1; tau <= 4; ++tau) {
      if (sentences.contains(render_sentence(implied, tau, bank, vocab))) {
        ++violations;
        break;
      }
    }
  }
  return violations;
}

void write_suite(const QuerySuite& suite, std::ostream& out) {
  for (const auto& q : suite.items) {
    nlohmann::ordered_json rec = {{"prompt", q.prompt},
                                  {"gold", q.gold},
                                  {"category", to_string(q.category)},
                                  {"direction", to_string(q.direction)},
                                  {"mode", to_string(q.mode)},
                                  {"graph_id", q.graph_id}};
    if (!q.suffix.empty()) rec["suffix"] = q.suffix;
    rec["fact"] = {q.reference_fact.head, q.reference_fact.relation, q.reference_fact.tail,
                   q.reference_fact.canonical_index};
    rec["cond"] = q.conditioned == ConditionedRole::Head ? "head" : "tail";
    rec["template"] = {to_string(q.template_family), q.template_index};
    out << rec.dump() << '\n';
  }
}

QuerySuite read_suite(std::istream& in) {
  QuerySuite suite;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    QueryItem q;
    q.prompt = rec.at("prompt").get<std::string>();
    q.gold = rec.at("gold").get<std::string>();
    q.category = parse_category(rec.at("category").get<std::string>());
    q.direction = parse_direction(rec.at("direction").get<std::string>());
    q.mode = parse_query_mode(rec.at("mode").get<std::string>());
    q.graph_id = rec.at("graph_id").get<std::string>();
    q.suffix = rec.value("suffix", "");
    if (rec.contains("fact")) {
      const auto& f = rec.at("fact");
      q.reference_fact = {f.at(0).get<std::string>(), f.at(1).get<std::string>(), f.at(2).get<std::string>(),
                          f.size() > 3 ? f.at(3).get<int>() : 0};
    }
    q.conditioned = rec.value("cond", "head") == "head" ? ConditionedRole::Head : ConditionedRole::Tail;
    if (rec.contains("template")) {
      q.template_family = parse_family(rec.at("template").at(0).get<std::string>());
      q.template_index = rec.at("template").at(1).get<int>();
    }
    suite.items.push_back(std::move(q));
  }
  return suite;
}

std::string suite_manifest(const QuerySuite& suite) {
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [key, n] : suite.counts())
    m[std::string(to_string(key.first)) + "/" + std::string(to_string(key.second))] = n;
  return m.dump(2);
}

}  // namespace relsem
