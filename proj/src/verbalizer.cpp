#include "relsem/verbalizer.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "relsem/error.hpp"

namespace relsem {

std::string_view to_string(Direction d) { return d == Direction::Forward ? "forward" : "reverse"; }
std::string_view to_string(ContentRole r) { return r == ContentRole::Train ? "train" : "eval"; }
std::string_view to_string(DirectionRegime r) {
  return r == DirectionRegime::OneDirectionalPeople ? "one_directional_people" : "bidirectional_jobs";
}
std::string_view to_string(SftDirection d) { return d == SftDirection::Both ? "both" : "reverse_only"; }

Direction parse_direction(std::string_view text) {
  if (text == "forward") return Direction::Forward;
  if (text == "reverse") return Direction::Reverse;
  throw FormatError("unknown direction '" + std::string(text) + "'");
}
ContentRole parse_content_role(std::string_view text) {
  if (text == "train") return ContentRole::Train;
  if (text == "eval") return ContentRole::Eval;
  throw FormatError("unknown content role '" + std::string(text) + "'");
}
DirectionRegime parse_direction_regime(std::string_view text) {
  if (text == "one_directional_people") return DirectionRegime::OneDirectionalPeople;
  if (text == "bidirectional_jobs") return DirectionRegime::BidirectionalJobs;
  throw FormatError("unknown direction regime '" + std::string(text) + "'");
}
SftDirection parse_sft_direction(std::string_view text) {
  if (text == "both") return SftDirection::Both;
  if (text == "reverse_only") return SftDirection::ReverseOnly;
  throw FormatError("unknown SFT direction '" + std::string(text) + "'");
}

std::string render_with(const Template& tmpl, const Triple& triple, const RelationVocab& vocab) {
  const bool is_job = triple.relation == vocab.attribute_relation;
  if (tmpl.family == TemplateFamily::PeopleSentence) {
    if (is_job || !vocab.is_person_relation(triple.relation))
      throw TemplateMismatch("relation '" + triple.relation + "' cannot fill a people template");
    return TemplateBank::render(tmpl, {{"person_a", triple.head},
                                       {"person_b", triple.tail},
                                       {"relationship", triple.relation}});
  }
  if (tmpl.family == TemplateFamily::JobSentence) {
    if (!is_job) throw TemplateMismatch("relation '" + triple.relation + "' cannot fill a job template");
    return TemplateBank::render(tmpl, {{"person", triple.head},
                                       {"job", triple.tail},
                                       {"article", article_for(triple.tail)}});
  }
  throw TemplateMismatch("template family " + std::string(to_string(tmpl.family)) +
                         " is not a sentence family");
}

std::string render_sentence(const Triple& triple, int tau, const TemplateBank& bank,
                            const RelationVocab& vocab) {
  const auto family = triple.relation == vocab.attribute_relation ? TemplateFamily::JobSentence
                                                                  : TemplateFamily::PeopleSentence;
  return render_with(bank.get(family, tau), triple, vocab);
}

std::string join_sentences(std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view paragraph) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    if (paragraph[i] == '.' && (i + 1 == paragraph.size() || paragraph[i + 1] == ' ')) {
      out.emplace_back(paragraph.substr(start, i + 1 - start));
      start = i + 2;
      i = start - 1;
    }
  }
  if (start < paragraph.size()) out.emplace_back(paragraph.substr(start));
  return out;
}

namespace {

Paragraph finish_paragraph(const Graph& graph, int k, std::vector<std::pair<int, int>> formats,
                           std::vector<std::string> rendered, Rng& rng) {
  Paragraph p;
  p.graph_id = graph.id;
  p.template_id = k;
  p.formats = std::move(formats);
  p.order.resize(rendered.size());
  std::iota(p.order.begin(), p.order.end(), 0);
  rng.shuffle(p.order);
  p.sentences.reserve(rendered.size());
  for (int idx : p.order) p.sentences.push_back(rendered[static_cast<std::size_t>(idx)]);
  p.text = join_sentences(p.sentences);
  return p;
}

Document to_document(Paragraph&& p, ContentRole role) {
  return {std::move(p.text), std::move(p.sentences), std::move(p.graph_id), p.template_id, role};
}

}  // namespace

std::vector<Paragraph> render_paragraphs(const Graph& graph, int K, const TemplateBank& bank, Rng& rng) {
  if (K < 1) throw ConfigError("K must be >= 1");
  std::vector<Paragraph> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    std::vector<std::pair<int, int>> formats;
    std::vector<std::string> rendered;
    for (const auto& t : graph.triples) {
      const int tau = rng.uniform_int(1, 4);
      formats.emplace_back(t.canonical_index, tau);
      rendered.push_back(render_sentence(t, tau, bank));
    }
    out.push_back(finish_paragraph(graph, k, std::move(formats), std::move(rendered), rng));
  }
  return out;
}

std::vector<Paragraph> render_paragraphs_bidirectional_jobs(const Graph& graph, int K,
                                                            const TemplateBank& bank, Rng& rng) {
  if (K < 1) throw ConfigError("K must be >= 1");
  const auto& vocab = RelationVocab::standard();
  std::vector<Paragraph> out;
  for (int k = 1; k <= K; ++k) {
    std::vector<std::pair<int, int>> formats;
    std::vector<std::string> rendered;
    for (const auto& t : graph.triples) {
      if (t.relation == vocab.attribute_relation) {
        // Job-first surface order, then one person-first format.
        formats.emplace_back(t.canonical_index, 1);
        rendered.push_back(render_sentence(t, 1, bank));
        const int tau = rng.uniform_int(2, 4);
        formats.emplace_back(t.canonical_index, tau);
        rendered.push_back(render_sentence(t, tau, bank));
      } else {
        const int tau = rng.uniform_int(1, 4);
        formats.emplace_back(t.canonical_index, tau);
        rendered.push_back(render_sentence(t, tau, bank));
      }
    }
    out.push_back(finish_paragraph(graph, k, std::move(formats), std::move(rendered), rng));
  }
  return out;
}

std::size_t Corpus::count(ContentRole role) const {
  return static_cast<std::size_t>(
      std::ranges::count_if(documents, [role](const Document& d) { return d.role == role; }));
}

namespace {

using RenderFn = std::vector<Paragraph> (*)(const Graph&, int, const TemplateBank&, Rng&);

// Renders each graph from its own child stream so the loop can run in parallel
// and still produce output independent of the thread count.
std::vector<Document> render_all(const std::vector<const Graph*>& graphs, int K, const TemplateBank& bank,
                                 std::uint64_t seed, ContentRole role, RenderFn render) {
  std::vector<std::vector<Paragraph>> per_graph(graphs.size());
  const Rng root(seed);
  const auto n = static_cast<std::int64_t>(graphs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& g = *graphs[static_cast<std::size_t>(i)];
    Rng rng = root.child({hash_string(g.id)});
    per_graph[static_cast<std::size_t>(i)] = render(g, K, bank, rng);
  }
  std::vector<Document> docs;
  docs.reserve(graphs.size() * static_cast<std::size_t>(K));
  for (auto& paragraphs : per_graph)
    for (auto& p : paragraphs) docs.push_back(to_document(std::move(p), role));
  return docs;
}

void sort_and_shuffle(std::vector<Document>& docs, std::uint64_t seed) {
  std::ranges::sort(docs, [](const Document& a, const Document& b) {
    return std::tie(a.graph_id, a.template_id) < std::tie(b.graph_id, b.template_id);
  });
  Rng rng(derive_seed(seed, {0x5AFF1EULL}));
  rng.shuffle(docs);
}

}  // namespace

Corpus build_pretrain_corpus(const GraphSet& graphs, int K, const TemplateBank& bank, std::uint64_t seed,
                             DirectionRegime regime) {
  const auto train = graphs.of_kind(GraphKind::Train);
  const auto eval = graphs.of_kind(GraphKind::Evaluation);
  Corpus corpus;
  corpus.documents = render_all(train, K, bank, derive_seed(seed, {1}), ContentRole::Train, render_paragraphs);
  const RenderFn eval_render = regime == DirectionRegime::BidirectionalJobs
                                   ? render_paragraphs_bidirectional_jobs
                                   : render_paragraphs;
  auto eval_docs = render_all(eval, K, bank, derive_seed(seed, {2}), ContentRole::Eval, eval_render);
  std::ranges::move(eval_docs, std::back_inserter(corpus.documents));
  sort_and_shuffle(corpus.documents, seed);
  return corpus;
}

Corpus build_eval_facts_bidirectional_jobs(const GraphSet& graphs, int K, const TemplateBank& bank,
                                           std::uint64_t seed) {
  Corpus corpus;
  corpus.documents = render_all(graphs.of_kind(GraphKind::Evaluation), K, bank, derive_seed(seed, {2}),
                                ContentRole::Eval, render_paragraphs_bidirectional_jobs);
  sort_and_shuffle(corpus.documents, seed);
  return corpus;
}

std::vector<SftPair> build_sft_corpus(const GraphSet& graphs, const Corpus& corpus, const TemplateBank& bank,
                                      std::uint64_t seed, SftDirection people_direction) {
  std::unordered_set<std::string> train_ids;
  for (const auto& d : corpus.documents)
    if (d.role == ContentRole::Train) train_ids.insert(d.graph_id);

  const auto& vocab = RelationVocab::standard();
  std::vector<Direction> directions = {Direction::Reverse};
  if (people_direction == SftDirection::Both) directions.push_back(Direction::Forward);

  const Rng root(derive_seed(seed, {0x5F7ULL}));
  std::vector<SftPair> pairs;
  for (const auto* g : graphs.of_kind(GraphKind::Train)) {
    if (!train_ids.contains(g->id)) continue;
    Rng rng = root.child({hash_string(g->id)});
    for (const auto& t : g->triples) {
      const bool is_job = t.relation == vocab.attribute_relation;
      for (const Direction dir : directions) {
        SftPair pair;
        pair.source_graph = g->id;
        pair.source_triple = t.canonical_index;
        pair.category = is_job ? "job" : "people";
        pair.direction = dir;
        const bool reverse = dir == Direction::Reverse;
        if (is_job) {
          const auto fam = reverse ? TemplateFamily::JobQuestionReverse : TemplateFamily::JobQuestionForward;
          pair.question = TemplateBank::render(bank.get(fam, rng.uniform_int(1, 4)), {{"person", t.head}});
          pair.answer = t.tail;
        } else {
          // Reverse conditions on the tail and asks for the head; forward the opposite.
          const auto fam =
              reverse ? TemplateFamily::PeopleQuestionReverse : TemplateFamily::PeopleQuestionForward;
          pair.question = TemplateBank::render(bank.get(fam, rng.uniform_int(1, 4)),
                                               {{"person", reverse ? t.tail : t.head},
                                                {"relationship", t.relation}});
          pair.answer = reverse ? t.head : t.tail;
        }
        pairs.push_back(std::move(pair));
      }
    }
  }
  return pairs;
}

std::string_view to_string(DiffusionRole r) {
  switch (r) {
    case DiffusionRole::Raw: return "raw";
    case DiffusionRole::Single: return "single";
    case DiffusionRole::Subset: return "subset";
  }
  return "?";
}

DiffusionRole parse_diffusion_role(std::string_view text) {
  if (text == "raw") return DiffusionRole::Raw;
  if (text == "single") return DiffusionRole::Single;
  if (text == "subset") return DiffusionRole::Subset;
  throw FormatError("unknown diffusion role '" + std::string(text) + "'");
}

std::size_t DiffusionCorpus::count(DiffusionRole role) const {
  return static_cast<std::size_t>(
      std::ranges::count_if(documents, [role](const DiffusionDocument& d) { return d.role == role; }));
}

std::vector<std::string> sample_subset(std::span<const std::string> sentences, Rng& rng) {
  const auto n = sentences.size();
  if (n < 3) throw DegenerateDocument("a Subset needs at least 3 sentences, got " + std::to_string(n));
  const int size = rng.uniform_int(2, static_cast<int>(n) - 1);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates picks a uniform `size`-subset; sorting restores order.
  for (std::size_t i = 0; i < static_cast<std::size_t>(size); ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(size));
  std::ranges::sort(idx);
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(sentences[i]);
  return out;
}

DiffusionCorpus restructure_for_diffusion(const Corpus& corpus, Rng& rng) {
  DiffusionCorpus out;
  for (const auto& doc : corpus.documents) {
    out.documents.push_back({doc.text, doc.sentences, DiffusionRole::Raw, doc.graph_id});
    if (doc.sentences.empty()) continue;
    const auto& one = doc.sentences[rng.uniform_index(doc.sentences.size())];
    out.documents.push_back({one, {one}, DiffusionRole::Single, doc.graph_id});
    try {
      for (int rep = 0; rep < 2; ++rep) {
        auto subset = sample_subset(doc.sentences, rng);
        out.documents.push_back({join_sentences(subset), subset, DiffusionRole::Subset, doc.graph_id});
      }
    } catch (const DegenerateDocument&) {
      ++out.degenerate_sources;
    }
  }
  return out;
}

namespace {

std::string escape_regex(std::string_view text) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : text) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

const char* slot_pattern(std::string_view slot) {
  if (slot == "person" || slot == "person_a" || slot == "person_b")
    return "([A-Z][a-z]+ [A-Z][a-z]+ [A-Z][a-z]+)";
  if (slot == "job") return "([a-z]+(?: [a-z]+)*)";
  if (slot == "article") return "(an?)";
  return "([a-z]+)";
}

}  // namespace

SentenceParser::SentenceParser(const TemplateBank& bank, const EntityPools& pools, const RelationVocab& vocab)
    : pools_(&pools), vocab_(&vocab) {
  for (const auto family : {TemplateFamily::PeopleSentence, TemplateFamily::JobSentence}) {
    for (const auto& t : bank.family(family)) {
      std::string re = "^";
      std::string_view text = t.text;
      std::size_t pos = 0;
      while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string_view::npos) {
          re += escape_regex(text.substr(pos));
          break;
        }
        re += escape_regex(text.substr(pos, open - pos));
        const auto close = text.find('}', open);
        re += slot_pattern(text.substr(open + 1, close - open - 1));
        pos = close + 1;
      }
      re += "$";
      patterns_.push_back({std::regex(re), slot_names(t.text), family == TemplateFamily::JobSentence});
    }
  }
}

bool SentenceParser::valid_name(const std::string& name) const {
  std::istringstream in(name);
  std::string f, m, l;
  in >> f >> m >> l;
  auto has = [](const std::vector<std::string>& pool, const std::string& w) {
    return std::ranges::find(pool, w) != pool.end();
  };
  return has(pools_->first_names, f) && has(pools_->middle_names, m) && has(pools_->last_names, l);
}

std::optional<Triple> SentenceParser::parse(std::string_view sentence) const {
  const std::string s(sentence);
  for (const auto& p : patterns_) {
    std::smatch m;
    if (!std::regex_match(s, m, p.re)) continue;
    Slots slots;
    for (std::size_t i = 0; i < p.slots.size(); ++i) slots[p.slots[i]] = m[i + 1].str();
    if (p.job_family) {
      const auto& job = slots["job"];
      if (!valid_name(slots["person"])) continue;
      if (std::ranges::find(pools_->jobs, job) == pools_->jobs.end()) continue;
      if (slots.contains("article") && slots["article"] != article_for(job)) continue;
      return Triple{slots["person"], vocab_->attribute_relation, job, 0};
    }
    const auto& rel = slots["relationship"];
    if (!vocab_->is_person_relation(rel)) continue;
    if (!valid_name(slots["person_a"]) || !valid_name(slots["person_b"])) continue;
    return Triple{slots["person_a"], rel, slots["person_b"], 0};
  }
  return std::nullopt;
}

std::vector<Triple> SentenceParser::parse_paragraph(std::string_view paragraph) const {
  std::vector<Triple> out;
  for (const auto& s : split_sentences(paragraph)) {
    auto t = parse(s);
    if (!t) throw FormatError("unparseable sentence: " + s);
    out.push_back(std::move(*t));
  }
  return out;
}

void write_corpus(const Corpus& corpus, std::ostream& text, std::ostream& provenance) {
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& d = corpus.documents[i];
    if (i > 0) text << '\n';
    text << d.text << '\n';
    nlohmann::ordered_json rec = {
        {"doc", i}, {"graph_id", d.graph_id}, {"k", d.template_id}, {"role", to_string(d.role)}};
    provenance << rec.dump() << '\n';
  }
}

Corpus read_corpus(std::istream& text, std::istream& provenance) {
  Corpus corpus;
  std::string line;
  std::string block;
  std::vector<std::string> blocks;
  while (std::getline(text, line)) {
    if (line.empty()) {
      if (!block.empty()) blocks.push_back(std::move(block));
      block.clear();
    } else {
      if (!block.empty()) block += ' ';
      block += line;
    }
  }
  if (!block.empty()) blocks.push_back(std::move(block));

  std::size_t i = 0;
  while (std::getline(provenance, line)) {
    if (line.empty()) continue;
    if (i >= blocks.size()) throw FormatError("corpus provenance has more records than documents");
    const auto rec = nlohmann::json::parse(line);
    Document d;
    d.text = std::move(blocks[i]);
    d.sentences = split_sentences(d.text);
    d.graph_id = rec.at("graph_id").get<std::string>();
    d.template_id = rec.at("k").get<int>();
    d.role = parse_content_role(rec.at("role").get<std::string>());
    corpus.documents.push_back(std::move(d));
    ++i;
  }
  if (i != blocks.size()) throw FormatError("corpus has documents without provenance");
  return corpus;
}

void write_sft(std::span<const SftPair> pairs, std::ostream& out) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json rec = {{"question", p.question},   {"answer", p.answer},
                                  {"category", p.category},   {"direction", to_string(p.direction)},
                                  {"graph_id", p.source_graph}, {"triple", p.source_triple}};
    out << rec.dump() << '\n';
  }
}

std::vector<SftPair> read_sft(std::istream& in) {
  std::vector<SftPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    SftPair p;
    p.question = rec.at("question").get<std::string>();
    p.answer = rec.at("answer").get<std::string>();
    p.category = rec.at("category").get<std::string>();
    p.direction = parse_direction(rec.at("direction").get<std::string>());
    p.source_graph = rec.at("graph_id").get<std::string>();
    p.source_triple = rec.value("triple", 0);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_diffusion_corpus(const DiffusionCorpus& corpus, std::ostream& out) {
  for (const auto& d : corpus.documents) {
    nlohmann::ordered_json rec = {{"role", to_string(d.role)}, {"graph_id", d.graph_id}, {"text", d.text}};
    out << rec.dump() << '\n';
  }
}

DiffusionCorpus read_diffusion_corpus(std::istream& in) {
  DiffusionCorpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    DiffusionDocument d;
    d.role = parse_diffusion_role(rec.at("role").get<std::string>());
    d.graph_id = rec.at("graph_id").get<std::string>();
    d.text = rec.at("text").get<std::string>();
    d.sentences = split_sentences(d.text);
    corpus.documents.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace relsem
