#include <doctest.h>

#include <sstream>

#include "relsem/error.hpp"
#include "relsem/evalgen.hpp"
#include "relsem/tokenizer.hpp"
#include "relsem/verbalizer.hpp"

using namespace relsem;

TEST_CASE("segment splits punctuation and possessives") {
  using V = std::vector<std::string>;
  CHECK(Vocab::segment("Ana Bo's father.") == V{"Ana", "Bo", "'s", "father", "."});
  CHECK(Vocab::segment("Q: who? A:") == V{"Q", ":", "who", "?", "A", ":"});
  CHECK(Vocab::segment("  a,  b ") == V{"a", ",", "b"});
}

TEST_CASE("specials take the first ids and the rest are sorted") {
  const Vocab v({"zeta", "alpha", "alpha"});
  CHECK(v.size() == Vocab::kNumSpecial + 2);
  CHECK(v.token(Vocab::kBos) == "<bos>");
  CHECK(v.token(Vocab::kMask) == "<mask>");
  CHECK(v.id("alpha") == Vocab::kNumSpecial);
  CHECK(v.id("zeta") == Vocab::kNumSpecial + 1);
  CHECK(v.id("missing") == Vocab::kUnk);
  CHECK_THROWS_AS(v.encode("alpha beta"), UnknownToken);
}

TEST_CASE("decode inverts encode on generated documents") {
  const auto pools = build_pools(41);
  const auto graphs = sample_graph_set({100, 50, 10}, pools, RelationVocab::standard(), 42);
  const auto& bank = TemplateBank::standard();
  const auto vocab = build_vocab(bank, pools);
  const auto corpus = build_pretrain_corpus(graphs, 4, bank, 43);
  for (const auto& d : corpus.documents) CHECK(vocab.decode(vocab.encode(d.text)) == d.text);
  const auto suite = gen_suite(graphs, bank, 44);
  for (const auto& q : suite.items) {
    CHECK(vocab.decode(vocab.encode(q.prompt)) == q.prompt);
    CHECK(vocab.decode(vocab.encode(q.gold)) == q.gold);
  }
}

TEST_CASE("vocab files round-trip and reject tampering") {
  const Vocab v({"b", "a", "c"});
  std::stringstream ss;
  v.save(ss);
  const auto text = ss.str();
  std::istringstream in(text);
  CHECK(Vocab::load(in) == v);
  std::string swapped = text;
  const auto pos = swapped.find("\na\nb\n");
  REQUIRE(pos != std::string::npos);
  swapped.replace(pos, 5, "\nb\na\n");
  std::istringstream bad(swapped);
  CHECK_THROWS_AS(Vocab::load(bad), FormatError);
}
