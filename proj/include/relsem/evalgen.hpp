#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "relsem/kg_synth.hpp"
#include "relsem/templates.hpp"
#include "relsem/verbalizer.hpp"

namespace relsem {

enum class Category { MemPeople, MemJob, LogicInv, LogicSym, IclCompInv, IclCompSym, IclQaInv, IclQaSym };
inline constexpr std::array<Category, 8> kAllCategories = {
    Category::MemPeople,  Category::MemJob,     Category::LogicInv, Category::LogicSym,
    Category::IclCompInv, Category::IclCompSym, Category::IclQaInv, Category::IclQaSym};

enum class QueryMode { Completion, Qa };

/// Which argument of the training-order fact the prompt conditions on.
enum class ConditionedRole { Head, Tail };

std::string_view to_string(Category c);
std::string_view to_string(QueryMode m);
Category parse_category(std::string_view text);
QueryMode parse_query_mode(std::string_view text);

struct QueryItem {
  std::string prompt;
  std::string suffix;  // text after the answer slot; only cloze items set it
  std::string gold;
  Category category = Category::MemPeople;
  Direction direction = Direction::Forward;
  QueryMode mode = QueryMode::Qa;
  std::string graph_id;
  Triple reference_fact;  // the A->r->B fact as stated in training order
  ConditionedRole conditioned = ConditionedRole::Head;
  TemplateFamily template_family = TemplateFamily::PeopleQuestionReverse;
  int template_index = 1;

  bool operator==(const QueryItem&) const = default;
};

/// Per-graph ICL yield. With the defaults each ICL graph contributes 6
/// inversion and 3 symmetry items per direction and mode.
struct IclYield {
  int templates = 3;              // completion templates / stated formats used
  int inversion_orderings = 2;    // state r_k, or state r_k^-1
  int symmetry_orderings = 1;
};

struct SuiteConfig {
  IclYield icl;
  bool include_memorize = true;
  bool include_logic = true;
  bool include_icl = true;
};

using GroupKey = std::pair<Category, Direction>;

struct QuerySuite {
  std::vector<QueryItem> items;

  std::map<GroupKey, std::size_t> counts() const;
  std::vector<const QueryItem*> select(Category c, Direction d) const;
};

std::vector<QueryItem> gen_memorize_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                            std::uint64_t seed);
std::vector<QueryItem> gen_logic_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                         std::uint64_t seed);
std::vector<QueryItem> gen_icl_queries(const GraphSet& graphs, const TemplateBank& bank, QueryMode mode,
                                       Direction dir, std::uint64_t seed, const IclYield& yield = {});

/// Every category in both directions.
QuerySuite gen_suite(const GraphSet& graphs, const TemplateBank& bank, std::uint64_t seed,
                     const SuiteConfig& config = {});

/// Cloze items over stated person facts for bidirectional decoders: forward
/// masks the tail of a rendered sentence, reverse masks its head.
std::vector<QueryItem> gen_cloze_queries(const GraphSet& graphs, const TemplateBank& bank, Direction dir,
                                         std::uint64_t seed);

/// Throws EntityLeak if any ICL person name occurs in a corpus document.
void check_icl_leak(const GraphSet& graphs, const Corpus& corpus);

/// Number of Logic items whose gold fact appears, under any sentence format,
/// in an eval-role document. Zero under the one-directional regime.
std::size_t count_withheld_violations(const QuerySuite& suite, const Corpus& corpus, const TemplateBank& bank);

void write_suite(const QuerySuite& suite, std::ostream& out);
QuerySuite read_suite(std::istream& in);
/// Counts per (category, direction) as a JSON object.
std::string suite_manifest(const QuerySuite& suite);

}  // namespace relsem
