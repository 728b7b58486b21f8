#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relsem/kg_synth.hpp"
#include "relsem/rng.hpp"
#include "relsem/templates.hpp"

namespace relsem {

enum class Direction { Forward, Reverse };
enum class ContentRole { Train, Eval };
enum class DirectionRegime { OneDirectionalPeople, BidirectionalJobs };
enum class SftDirection { ReverseOnly, Both };

std::string_view to_string(Direction d);
std::string_view to_string(ContentRole r);
std::string_view to_string(DirectionRegime r);
std::string_view to_string(SftDirection d);
Direction parse_direction(std::string_view text);
ContentRole parse_content_role(std::string_view text);
DirectionRegime parse_direction_regime(std::string_view text);
SftDirection parse_sft_direction(std::string_view text);

/// Renders a triple with format `tau` (1..4) of the family its relation belongs to.
std::string render_sentence(const Triple& triple, int tau, const TemplateBank& bank,
                            const RelationVocab& vocab = RelationVocab::standard());

/// Renders a triple with an explicit sentence template. Throws TemplateMismatch
/// when the triple's relation category does not match the template family.
std::string render_with(const Template& tmpl, const Triple& triple,
                        const RelationVocab& vocab = RelationVocab::standard());

struct Paragraph {
  std::string graph_id;
  int template_id = 1;                           // k in 1..K
  std::vector<std::pair<int, int>> formats;      // (canonical index, tau) per rendered sentence
  std::vector<int> order;                        // permutation: position -> index into `formats`
  std::vector<std::string> sentences;            // in shuffled order
  std::string text;
};

/// Joins sentences with single spaces; splits a paragraph back at sentence ends.
std::string join_sentences(std::span<const std::string> sentences);
std::vector<std::string> split_sentences(std::string_view paragraph);

/// K independently format-sampled and shuffled paragraphs of one graph.
std::vector<Paragraph> render_paragraphs(const Graph& graph, int K, const TemplateBank& bank, Rng& rng);

/// Evaluation paragraphs where every job fact appears in both surface orders
/// ("{job} is the job of P" plus one person-first format); person facts stay single.
std::vector<Paragraph> render_paragraphs_bidirectional_jobs(const Graph& graph, int K,
                                                            const TemplateBank& bank, Rng& rng);

struct Document {
  std::string text;
  std::vector<std::string> sentences;
  std::string graph_id;
  int template_id = 1;
  ContentRole role = ContentRole::Train;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t count(ContentRole role) const;
};

/// K paragraphs per Train graph (role train) and per Evaluation graph (role
/// eval), rendered from per-graph child seeds, then shuffled globally.
Corpus build_pretrain_corpus(const GraphSet& graphs, int K, const TemplateBank& bank, std::uint64_t seed,
                             DirectionRegime regime = DirectionRegime::OneDirectionalPeople);

/// Evaluation content only, with job facts rendered in both surface orders.
Corpus build_eval_facts_bidirectional_jobs(const GraphSet& graphs, int K, const TemplateBank& bank,
                                           std::uint64_t seed);

struct SftPair {
  std::string question;
  std::string answer;
  std::string source_graph;
  int source_triple = 0;
  std::string category;  // "people" or "job"
  Direction direction = Direction::Reverse;

  bool operator==(const SftPair&) const = default;
};

/// One QA pair per (train graph present in `corpus`, triple, direction).
std::vector<SftPair> build_sft_corpus(const GraphSet& graphs, const Corpus& corpus, const TemplateBank& bank,
                                      std::uint64_t seed, SftDirection people_direction = SftDirection::Both);

enum class DiffusionRole { Raw, Single, Subset };
std::string_view to_string(DiffusionRole r);
DiffusionRole parse_diffusion_role(std::string_view text);

struct DiffusionDocument {
  std::string text;
  std::vector<std::string> sentences;
  DiffusionRole role = DiffusionRole::Raw;
  std::string graph_id;
};

struct DiffusionCorpus {
  std::vector<DiffusionDocument> documents;
  int degenerate_sources = 0;  // sources too short to yield a Subset

  std::size_t count(DiffusionRole role) const;
};

/// Uniform subset of 2..n-1 sentences in original order. Throws
/// DegenerateDocument when n < 3.
std::vector<std::string> sample_subset(std::span<const std::string> sentences, Rng& rng);

/// Raw : Single : Subset = 1 : 1 : 2 per source document.
DiffusionCorpus restructure_for_diffusion(const Corpus& corpus, Rng& rng);

/// Recovers triples from rendered sentences using the template bank.
class SentenceParser {
 public:
  SentenceParser(const TemplateBank& bank, const EntityPools& pools,
                 const RelationVocab& vocab = RelationVocab::standard());

  std::optional<Triple> parse(std::string_view sentence) const;
  std::vector<Triple> parse_paragraph(std::string_view paragraph) const;

 private:
  struct Pattern {
    std::regex re;
    std::vector<std::string> slots;
    bool job_family;
  };
  bool valid_name(const std::string& name) const;

  std::vector<Pattern> patterns_;
  const EntityPools* pools_;
  const RelationVocab* vocab_;
};

// File formats: corpus text is one document per blank-line-separated block;
// provenance and SFT files are line-delimited JSON.
void write_corpus(const Corpus& corpus, std::ostream& text, std::ostream& provenance);
Corpus read_corpus(std::istream& text, std::istream& provenance);
void write_sft(std::span<const SftPair> pairs, std::ostream& out);
std::vector<SftPair> read_sft(std::istream& in);
void write_diffusion_corpus(const DiffusionCorpus& corpus, std::ostream& out);
DiffusionCorpus read_diffusion_corpus(std::istream& in);

}  // namespace relsem
