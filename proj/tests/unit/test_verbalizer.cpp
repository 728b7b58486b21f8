#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/verbalizer.hpp"

using namespace relsem;

namespace {

struct World {
  EntityPools pools = build_pools(21);
  GraphSet graphs = sample_graph_set({60, 30, 20}, pools, RelationVocab::standard(), 22);
  const TemplateBank& bank = TemplateBank::standard();
};

const World& world() {
  static const World w;
  return w;
}

}  // namespace

TEST_CASE("render_sentence fills people and job templates") {
  const auto& bank = TemplateBank::standard();
  const Triple people{"Ana Bo Cu", "father", "Di Ef Gh", 1};
  CHECK(render_sentence(people, 1, bank) == "Ana Bo Cu is the father of Di Ef Gh.");
  CHECK(render_sentence(people, 2, bank) == "Ana Bo Cu serves as Di Ef Gh's father.");
  const Triple job{"Ana Bo Cu", "job", "engineer", 5};
  CHECK(render_sentence(job, 1, bank) == "engineer is the job of Ana Bo Cu.");
  CHECK(render_sentence(job, 2, bank) == "Ana Bo Cu works as an engineer.");
  CHECK(render_sentence(job, 4, bank) == "Ana Bo Cu is employed as an engineer.");
}

TEST_CASE("render_with refuses a template of the wrong family") {
  const auto& bank = TemplateBank::standard();
  const Triple job{"Ana Bo Cu", "job", "baker", 5};
  CHECK_THROWS_AS(render_with(bank.get(TemplateFamily::PeopleSentence, 1), job), TemplateMismatch);
  CHECK_THROWS_AS(TemplateBank::render(bank.get(TemplateFamily::JobSentence, 2), {{"person", "X"}}),
                  TemplateMismatch);
}

TEST_CASE("article_for picks a or an") {
  CHECK(article_for("engineer") == "an");
  CHECK(article_for("baker") == "a");
  CHECK(article_for("Officer") == "an");
}

TEST_CASE("paragraphs are shuffled renderings of every triple") {
  const auto& w = world();
  Rng rng(1);
  const auto& g = *w.graphs.of_kind(GraphKind::Train).front();
  const auto paras = render_paragraphs(g, 4, w.bank, rng);
  REQUIRE(paras.size() == 4);
  for (std::size_t k = 0; k < paras.size(); ++k) {
    const auto& p = paras[k];
    CHECK(p.template_id == static_cast<int>(k) + 1);
    CHECK(p.sentences.size() == g.triples.size());
    auto sorted = p.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(sorted.size());
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    for (std::size_t pos = 0; pos < p.order.size(); ++pos) {
      const auto [canon, tau] = p.formats[static_cast<std::size_t>(p.order[pos])];
      CHECK(p.sentences[pos] == render_sentence(*g.find(canon), tau, w.bank));
    }
    CHECK(split_sentences(p.text) == p.sentences);
    CHECK(join_sentences(p.sentences) == p.text);
  }
}

TEST_CASE("sentence formats are drawn uniformly") {
  const auto& w = world();
  Rng rng(2);
  std::vector<long> counts(4, 0);
  const auto& g = *w.graphs.of_kind(GraphKind::Train).front();
  for (int i = 0; i < 3000; ++i)
    for (const auto& p : render_paragraphs(g, 1, w.bank, rng))
      for (const auto& [_, tau] : p.formats) ++counts[static_cast<std::size_t>(tau - 1)];
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double chi = 0.0;
  for (long c : counts) chi += (c - total / 4) * (c - total / 4) / (total / 4);
  CHECK(chi < 16.27);  // 3 dof, p = 0.001
}

TEST_CASE("the parser recovers every rendered triple") {
  const auto& w = world();
  const SentenceParser parser(w.bank, w.pools);
  Rng rng(3);
  int paragraphs = 0;
  for (const auto& g : w.graphs.graphs) {
    if (g.kind == GraphKind::Icl) continue;
    for (const auto& p : render_paragraphs(g, 4, w.bank, rng)) {
      auto parsed = parser.parse_paragraph(p.text);
      auto expected = g.triples;
      for (auto& t : parsed) t.canonical_index = 0;
      for (auto& t : expected) t.canonical_index = 0;
      auto key = [](const Triple& t) { return t.head + "|" + t.relation + "|" + t.tail; };
      std::multiset<std::string> a, b;
      for (const auto& t : parsed) a.insert(key(t));
      for (const auto& t : expected) b.insert(key(t));
      CHECK(a == b);
      ++paragraphs;
    }
  }
  CHECK(paragraphs == 360);
}

TEST_CASE("evaluation documents never state withheld facts") {
  const auto& w = world();
  const auto corpus = build_pretrain_corpus(w.graphs, 4, w.bank, 5);
  CHECK(corpus.count(ContentRole::Train) == 60 * 4);
  CHECK(corpus.count(ContentRole::Eval) == 30 * 4);
  const SentenceParser parser(w.bank, w.pools);
  std::map<std::string, const Graph*> by_id;
  for (const auto& g : w.graphs.graphs) by_id[g.id] = &g;
  for (const auto& d : corpus.documents) {
    if (d.role != ContentRole::Eval) continue;
    const Graph& g = *by_id.at(d.graph_id);
    for (const auto& t : parser.parse_paragraph(d.text)) {
      const bool reverse_inv = t.head == g.persons[1] && t.tail == g.persons[0];
      const bool reverse_sym = t.head == g.persons[2] && t.tail == g.persons[1];
      CHECK_FALSE(reverse_inv);
      CHECK_FALSE(reverse_sym);
    }
  }
}

TEST_CASE("bidirectional jobs state each job in both surface orders") {
  const auto& w = world();
  Rng rng(6);
  const auto& g = *w.graphs.of_kind(GraphKind::Evaluation).front();
  for (const auto& p : render_paragraphs_bidirectional_jobs(g, 2, w.bank, rng)) {
    std::map<int, std::set<int>> taus;
    for (const auto& [canon, tau] : p.formats) taus[canon].insert(tau);
    for (int c = 5; c <= 7; ++c) {
      REQUIRE(taus[c].size() == 2);
      CHECK(*taus[c].begin() == 1);
    }
    for (int c : {1, 3}) CHECK(taus[c].size() == 1);
  }
}

TEST_CASE("SFT pairs cover each train triple in each direction") {
  const auto& w = world();
  const auto corpus = build_pretrain_corpus(w.graphs, 2, w.bank, 7);
  const auto both = build_sft_corpus(w.graphs, corpus, w.bank, 7, SftDirection::Both);
  CHECK(both.size() == 60 * 7 * 2);
  const auto rev = build_sft_corpus(w.graphs, corpus, w.bank, 7, SftDirection::ReverseOnly);
  for (const auto& p : rev) {
    if (p.category == "people") CHECK(p.direction == Direction::Reverse);
    CHECK_FALSE(p.answer.empty());
  }
  std::stringstream ss;
  write_sft(both, ss);
  CHECK(read_sft(ss) == both);
}

TEST_CASE("sample_subset keeps order and size bounds") {
  const std::vector<std::string> s{"a.", "b.", "c.", "d.", "e."};
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto sub = sample_subset(s, rng);
    CHECK(sub.size() >= 2);
    CHECK(sub.size() <= 4);
    CHECK(std::is_sorted(sub.begin(), sub.end()));
  }
  const std::vector<std::string> two{"a.", "b."};
  CHECK_THROWS_AS(sample_subset(two, rng), DegenerateDocument);
}

TEST_CASE("diffusion restructuring yields raw:single:subset = 1:1:2") {
  const auto& w = world();
  const auto corpus = build_pretrain_corpus(w.graphs, 2, w.bank, 9);
  Rng rng(10);
  const auto dc = restructure_for_diffusion(corpus, rng);
  const auto n = corpus.documents.size();
  CHECK(dc.count(DiffusionRole::Raw) == n);
  CHECK(dc.count(DiffusionRole::Single) == n);
  CHECK(dc.count(DiffusionRole::Subset) == 2 * n);
  std::stringstream ss;
  write_diffusion_corpus(dc, ss);
  const auto back = read_diffusion_corpus(ss);
  REQUIRE(back.documents.size() == dc.documents.size());
  CHECK(back.documents.back().text == dc.documents.back().text);
}

TEST_CASE("corpus files round-trip") {
  const auto& w = world();
  const auto corpus = build_pretrain_corpus(w.graphs, 2, w.bank, 11);
  std::stringstream text, prov;
  write_corpus(corpus, text, prov);
  const auto back = read_corpus(text, prov);
  REQUIRE(back.documents.size() == corpus.documents.size());
  for (std::size_t i = 0; i < back.documents.size(); ++i) {
    CHECK(back.documents[i].text == corpus.documents[i].text);
    CHECK(back.documents[i].graph_id == corpus.documents[i].graph_id);
    CHECK(back.documents[i].role == corpus.documents[i].role);
  }
}
