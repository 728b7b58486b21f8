#include <doctest.h>

#include <sstream>

#include "relsem/error.hpp"
#include "relsem/evalgen.hpp"

using namespace relsem;

namespace {

struct Fixture {
  EntityPools pools = build_pools(31);
  GraphSet graphs = sample_graph_set({40, 50, 20}, pools, RelationVocab::standard(), 32);
  const TemplateBank& bank = TemplateBank::standard();
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("suite counts per group follow the per-graph yield") {
  const auto suite = gen_suite(fx().graphs, fx().bank, 1);
  const auto counts = suite.counts();
  for (auto d : {Direction::Forward, Direction::Reverse}) {
    CHECK(counts.at({Category::MemPeople, d}) == 100);
    CHECK(counts.at({Category::MemJob, d}) == 150);
    CHECK(counts.at({Category::LogicInv, d}) == 50);
    CHECK(counts.at({Category::LogicSym, d}) == 50);
    CHECK(counts.at({Category::IclCompInv, d}) == 120);
    CHECK(counts.at({Category::IclCompSym, d}) == 60);
    CHECK(counts.at({Category::IclQaInv, d}) == 120);
    CHECK(counts.at({Category::IclQaSym, d}) == 60);
  }
}

TEST_CASE("logic gold answers are implied, not stated") {
  const auto& f = fx();
  const auto& vocab = RelationVocab::standard();
  for (auto d : {Direction::Forward, Direction::Reverse}) {
    for (const auto& q : gen_logic_queries(f.graphs, f.bank, d, 2)) {
      const auto& r = q.reference_fact;
      // The question asks the inverse relation; its answer is one end of the stated fact.
      CHECK((q.gold == r.head || q.gold == r.tail));
      CHECK(q.prompt.find(vocab.inverse_of(r.relation)) != std::string::npos);
    }
  }
  const auto corpus = build_pretrain_corpus(f.graphs, 4, f.bank, 3);
  CHECK(count_withheld_violations(gen_suite(f.graphs, f.bank, 2), corpus, f.bank) == 0);
}

TEST_CASE("memorize questions answer the stated fact") {
  const auto& f = fx();
  for (const auto& q : gen_memorize_queries(f.graphs, f.bank, Direction::Forward, 4)) {
    if (q.category == Category::MemPeople) CHECK(q.gold == q.reference_fact.tail);
    if (q.category == Category::MemJob) CHECK(q.gold == q.reference_fact.tail);
  }
  for (const auto& q : gen_memorize_queries(f.graphs, f.bank, Direction::Reverse, 4))
    if (q.category == Category::MemPeople) CHECK(q.gold == q.reference_fact.head);
}

TEST_CASE("ICL items use only never-trained entities") {
  const auto& f = fx();
  const auto corpus = build_pretrain_corpus(f.graphs, 4, f.bank, 5);
  CHECK_NOTHROW(check_icl_leak(f.graphs, corpus));
  auto leaky = corpus;
  const auto& icl_person = f.graphs.of_kind(GraphKind::Icl).front()->persons[0];
  leaky.documents.front().text += " " + icl_person + " is the father of Someone Else Here.";
  CHECK_THROWS_AS(check_icl_leak(f.graphs, leaky), EntityLeak);
}

TEST_CASE("ICL completion prompts end at the answer slot") {
  const auto& f = fx();
  for (const auto& q : gen_icl_queries(f.graphs, f.bank, QueryMode::Completion, Direction::Reverse, 6)) {
    CHECK(q.prompt.back() != '.');
    CHECK(q.gold == q.reference_fact.head);
  }
  const IclYield narrow{1, 1, 1};
  CHECK(gen_icl_queries(f.graphs, f.bank, QueryMode::Qa, Direction::Forward, 6, narrow).size() == 20 * 2);
  CHECK_THROWS_AS(gen_icl_queries(f.graphs, f.bank, QueryMode::Qa, Direction::Forward, 6, {4, 2, 1}), ConfigError);
}

TEST_CASE("cloze items split a rendered sentence around the answer") {
  const auto& f = fx();
  for (auto d : {Direction::Forward, Direction::Reverse}) {
    const auto items = gen_cloze_queries(f.graphs, f.bank, d, 7);
    CHECK(items.size() == 100);
    for (const auto& q : items) {
      const auto full = render_with(f.bank.get(TemplateFamily::PeopleSentence, q.template_index), q.reference_fact);
      std::string rebuilt = q.prompt;
      if (!rebuilt.empty()) rebuilt += ' ';
      rebuilt += q.gold;
      if (!q.suffix.empty() && q.suffix.front() != '\'' && q.suffix.front() != '.') rebuilt += ' ';
      rebuilt += q.suffix;
      CHECK(rebuilt == full);
    }
  }
}

TEST_CASE("suites round-trip and are seed-deterministic") {
  const auto& f = fx();
  const auto a = gen_suite(f.graphs, f.bank, 8);
  CHECK(gen_suite(f.graphs, f.bank, 8).items == a.items);
  std::stringstream ss;
  write_suite(a, ss);
  CHECK(read_suite(ss).items == a.items);
  CHECK(suite_manifest(a).find("mem_job") != std::string::npos);
}
