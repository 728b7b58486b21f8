#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "relsem/rng.hpp"

namespace relsem {

inline constexpr int kPoolSize = 100;
inline constexpr int kJobCount = 300;
inline constexpr int kDefaultEvalGraphs = 500;

/// Name-part pools and the occupation list every graph samples from.
struct EntityPools {
  std::vector<std::string> first_names;
  std::vector<std::string> middle_names;
  std::vector<std::string> last_names;
  std::vector<std::string> jobs;

  bool operator==(const EntityPools&) const = default;
};

/// Builds three disjoint pools of pronounceable pseudo-word name parts plus the
/// bundled occupation list. Same seed, same pools.
EntityPools build_pools(std::uint64_t seed);

/// Throws FormatError if the pools break any size/disjointness/casing rule.
void validate_pools(const EntityPools& pools);

/// The bundled 300-occupation list, in file order.
const std::vector<std::string>& bundled_jobs();

struct RelationVocab {
  std::array<std::pair<std::string, std::string>, 3> inversion_pairs;
  std::array<std::string, 3> symmetric_relations;
  std::string attribute_relation;

  static const RelationVocab& standard();

  bool is_person_relation(std::string_view relation) const;
  bool is_symmetric(std::string_view relation) const;
  /// Partner of an inversion relation, or the relation itself when symmetric.
  std::string inverse_of(std::string_view relation) const;
};

enum class GraphKind { Train, Evaluation, Icl };

std::string_view to_string(GraphKind kind);
GraphKind parse_graph_kind(std::string_view text);

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
  int canonical_index = 0;

  bool operator==(const Triple&) const = default;
};

struct Graph {
  std::string id;
  GraphKind kind = GraphKind::Train;
  std::array<std::string, 3> persons;
  std::vector<std::string> jobs;  // empty for Icl graphs
  int inversion_choice = 1;       // 1..3
  int symmetry_choice = 1;        // 1..3
  std::vector<Triple> triples;

  /// Triple with the given canonical index, or nullptr.
  const Triple* find(int canonical_index) const;

  bool operator==(const Graph&) const = default;
};

/// Canonical indices each graph kind keeps.
std::vector<int> canonical_indices(GraphKind kind);

/// Tracks every full name handed out so far.
class EntityRegistry {
 public:
  bool try_register(const std::string& full_name) { return names_.insert(full_name).second; }
  bool contains(const std::string& full_name) const { return names_.contains(full_name); }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_set<std::string> names_;
};

inline constexpr int kMaxNameRetries = 1000;

/// Samples one graph of `kind`; all three persons are new to `registry`.
/// Throws PoolExhausted after kMaxNameRetries consecutive collisions.
Graph sample_graph(const EntityPools& pools, const RelationVocab& vocab, GraphKind kind,
                   EntityRegistry& registry, Rng& rng, std::string id);

struct GraphCounts {
  int train = 0;
  int eval = kDefaultEvalGraphs;
  int icl = 0;
};

struct GraphSet {
  std::vector<Graph> graphs;

  std::vector<const Graph*> of_kind(GraphKind kind) const;
  const Graph* find(std::string_view id) const;

  bool operator==(const GraphSet&) const = default;
};

/// Train graphs first, then Evaluation, then Icl, from one shared registry.
GraphSet sample_graph_set(const GraphCounts& counts, const EntityPools& pools,
                          const RelationVocab& vocab, std::uint64_t seed);

/// Line-delimited JSON: a header record, then one graph per line.
void write_graph_set(const GraphSet& set, std::ostream& out);
GraphSet read_graph_set(std::istream& in);

}  // namespace relsem
