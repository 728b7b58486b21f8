#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relsem/error.hpp"
#include "relsem/inference.hpp"
#include "relsem/probe.hpp"

using namespace relsem;

namespace {

ModelConfig tiny(int layers, int vocab) {
  ModelConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = 16;
  c.vocab_size = vocab;
  c.max_context = 16;
  return c;
}

std::vector<ProbePrompt> random_prompts(int n, int vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ProbePrompt> out(static_cast<std::size_t>(n));
  for (auto& p : out) {
    p.ids.push_back(Vocab::kBos);
    const auto len = 2 + rng.uniform_index(10);
    for (std::size_t i = 0; i < len; ++i)
      p.ids.push_back(static_cast<TokenId>(Vocab::kNumSpecial + rng.uniform_index(static_cast<std::uint64_t>(vocab - Vocab::kNumSpecial))));
    p.gold = static_cast<TokenId>(rng.uniform_index(static_cast<std::uint64_t>(vocab)));
  }
  return out;
}

}  // namespace

TEST_CASE("read_lens reports logit, probability and tie-aware rank") {
  const std::vector<float> z{2.0f, 1.0f, 2.0f, 0.0f};
  const auto r = read_lens(z, 2);
  CHECK(r.logit == 2.0);
  CHECK(r.rank == 2);
  const double s = 2 * std::exp(2.0) + std::exp(1.0) + 1.0;
  CHECK(r.prob == doctest::Approx(std::exp(2.0) / s));
  CHECK(read_lens(z, 0).rank == 1);
  CHECK(read_lens(z, 3).rank == 4);
  CHECK_THROWS_AS(read_lens(z, 4), ShapeMismatch);
}

TEST_CASE("the last-layer lens equals the model's own next-token readout") {
  const Model m(tiny(3, 40), 1);
  for (const auto& p : random_prompts(100, 40, 2)) {
    const auto lens = probe_prompt(m, p);
    REQUIRE(lens.size() == 4);
    const auto probs = next_token_probs(m, p.ids);
    CHECK(std::abs(lens.back().prob - probs[static_cast<std::size_t>(p.gold)]) < 1e-6);
  }
}

TEST_CASE("probe_layers averages per-prompt readouts") {
  const Model m(tiny(2, 40), 3);
  const auto prompts = random_prompts(20, 40, 4);
  const auto records = probe_layers(m, prompts);
  REQUIRE(records.size() == 3);
  for (std::size_t l = 0; l < records.size(); ++l) {
    double mean = 0.0;
    for (const auto& p : prompts) mean += probe_prompt(m, p)[l].rank;
    CHECK(records[l].layer == static_cast<int>(l));
    CHECK(records[l].n_prompts == 20);
    CHECK(records[l].mean_rank == doctest::Approx(mean / 20.0));
  }
  CHECK_THROWS_AS(probe_layers(m, std::vector<ProbePrompt>{}), EmptyPromptSet);
}

TEST_CASE("an untrained model ranks random gold tokens near the middle") {
  const int V = 300;
  const Model m(tiny(2, V), 5);
  const auto records = probe_layers(m, random_prompts(400, V, 6));
  for (const auto& r : records) CHECK(std::abs(r.mean_rank - (V + 1) / 2.0) < 0.1 * V / 2.0);
}

TEST_CASE("probe CSV round-trips and renders") {
  const std::vector<LayerProbeRecord> recs{{0, 1.5, 0.1, 20.0, 7}, {1, 2.5, 0.2, 3.0, 7}};
  std::stringstream ss;
  write_probe_csv(recs, "mem_job", ss);
  const auto rows = read_probe_csv(ss);
  REQUIRE(rows.size() == 6);
  bool found = false;
  for (const auto& r : rows)
    if (r.layer == 1 && r.metric == "rank") {
      CHECK(r.value == 3.0);
      CHECK(r.category == "mem_job");
      CHECK(r.n_prompts == 7);
      found = true;
    }
  CHECK(found);
  const auto svg = probe_svg(rows);
  CHECK(svg.rfind("<svg", 0) == 0);
}
