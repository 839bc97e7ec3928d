#pragma once

// Knowledge-graph storage and path primitives.
//
// Entities and relations are interned into dense ids in first-seen order.
// Every base relation r (id < R) gets a synthetic inverse with id r + R, and
// id 2R is the `__stay__` self-loop used to pad reasoning walks. The triple
// set only stores base relations; inverse and stay edges are implied.

#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgpath {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

inline constexpr std::string_view kStayRelation = "__stay__";
inline constexpr char kInversePrefix = '~';

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  auto operator<=>(const Triple&) const = default;
};

// One outgoing step: follow `relation` to reach `entity`.
struct Edge {
  RelationId relation = 0;
  EntityId entity = 0;
  auto operator<=>(const Edge&) const = default;
};

enum class Direction { forward, backward };

// Where a path came from. A path produced by both generators carries both bits.
enum class Provenance : std::uint8_t {
  none = 0,
  gold = 1,
  semantic = 2,
  structural = 4,
};

constexpr Provenance operator|(Provenance a, Provenance b) {
  return static_cast<Provenance>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
constexpr bool has(Provenance set, Provenance flag) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(flag)) != 0;
}
std::string to_string(Provenance p);

class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Immutable after construction; safe for concurrent reads.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  std::size_t num_entities() const { return entities_.size(); }
  // Base relations only.
  std::size_t num_relations() const { return relations_.size(); }
  // Base + inverse + stay.
  std::size_t num_augmented_relations() const { return 2 * relations_.size() + 1; }
  std::size_t num_triples() const { return triples_.size(); }

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }

  const std::string& entity_name(EntityId e) const;
  // Handles inverse ("~name") and stay ids as well as base relations.
  std::string relation_name(RelationId r) const;

  std::optional<EntityId> find_entity(std::string_view name) const { return entities_.find(name); }
  std::optional<RelationId> find_relation(std::string_view name) const;
  EntityId entity_id(std::string_view name) const;
  RelationId relation_id(std::string_view name) const;

  bool is_base(RelationId r) const { return r < relations_.size(); }
  bool is_inverse(RelationId r) const {
    return r >= relations_.size() && r < 2 * relations_.size();
  }
  RelationId stay_relation() const { return static_cast<RelationId>(2 * relations_.size()); }
  RelationId inverse(RelationId r) const;
  bool valid_relation(RelationId r) const { return r < num_augmented_relations(); }
  bool valid_entity(EntityId e) const { return e < entities_.size(); }

  // Sorted by (head, relation, tail).
  const std::vector<Triple>& triples() const { return triples_; }
  bool has_triple(EntityId h, RelationId r, EntityId t) const;
  // Edge test over the augmented relation set (inverse and stay included).
  bool has_edge(EntityId from, RelationId r, EntityId to) const;

  // Base-relation adjacency, sorted by (relation, entity).
  std::span<const Edge> out_edges(EntityId e) const;
  std::span<const Edge> in_edges(EntityId e) const;
  // Out edges plus inverse edges (in edges relabelled with inverse ids), no
  // stay edge. Sorted by (relation, entity).
  std::span<const Edge> augmented_edges(EntityId e) const;

  // Builders.
  static KnowledgeGraph from_records(
      const std::vector<std::array<std::string, 3>>& records);

 private:
  friend class KnowledgeGraphBuilder;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::vector<std::vector<Edge>> out_;
  std::vector<std::vector<Edge>> in_;
  std::vector<std::vector<Edge>> augmented_;
};

class KnowledgeGraphBuilder {
 public:
  // Throws MalformedRecord for empty fields or reserved relation names.
  void add(std::string_view head, std::string_view relation, std::string_view tail,
           std::size_t line = 0);
  // Registers an entity even if it has no triples.
  EntityId add_entity(std::string_view name) { return kg_.entities_.intern(name); }
  RelationId add_relation(std::string_view name);
  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph kg_;
};

// TAB-separated triples, `#` comments and blank lines skipped.
KnowledgeGraph ingest_triples(std::istream& in);
KnowledgeGraph load_triples(const std::string& path);
void write_triples(const KnowledgeGraph& kg, std::ostream& out);

struct RelationPath {
  std::vector<RelationId> relations;
  auto operator<=>(const RelationPath&) const = default;
};

struct ReasoningPath {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  Provenance source = Provenance::none;

  static ReasoningPath zero_hop(EntityId e, Provenance source) { return {{e}, {}, source}; }

  std::size_t hops() const { return relations.size(); }
  EntityId start() const { return entities.front(); }
  EntityId end() const { return entities.back(); }
  RelationPath relation_path() const { return {relations}; }

  // Identity ignores provenance.
  bool same_as(const ReasoningPath& o) const {
    return entities == o.entities && relations == o.relations;
  }
  bool operator<(const ReasoningPath& o) const {
    if (entities != o.entities) return entities < o.entities;
    return relations < o.relations;
  }
};

// Drops `__stay__` hops; the result walks the same entities without padding.
ReasoningPath compact(const ReasoningPath& p, const KnowledgeGraph& kg);

// Shape and edge-existence check.
bool validates(const ReasoningPath& p, const KnowledgeGraph& kg);

struct PathSet {
  std::vector<ReasoningPath> paths;
  bool complete = true;

  // Returns false if an identical path was already present.
  bool insert(ReasoningPath p);
  std::size_t size() const { return paths.size(); }
  bool empty() const { return paths.empty(); }
};

struct QAInstance {
  std::string id;
  std::string question;
  std::vector<EntityId> question_entities;  // sorted, unique
  std::vector<EntityId> answer_entities;    // sorted, unique
  std::vector<std::string> answer_labels;
  // Surface names from the dataset that did not resolve against the KG.
  std::vector<std::string> unresolved;

  bool linked() const { return !question_entities.empty() && !answer_entities.empty(); }
};

std::vector<Edge> neighbors(const KnowledgeGraph& kg, EntityId e, Direction direction);

struct ShortestPathOptions {
  int max_hops = 4;
  // Enumeration stops after this many paths and the set is marked incomplete.
  std::size_t max_paths = 4096;
};

// All minimal-length simple paths from any source to any target over the
// inverse-augmented graph. The minimum is taken globally over all pairs.
PathSet shortest_paths(const KnowledgeGraph& kg, std::span<const EntityId> sources,
                       std::span<const EntityId> targets, const ShortestPathOptions& opts = {});

struct Grounding {
  std::vector<ReasoningPath> paths;
  bool truncated = false;
};

inline constexpr std::size_t kDefaultFanout = 256;

// Every walk from `start` that follows `rp` in order. Stops at `fanout`
// groundings and flags truncation.
Grounding instantiate_relation_path(const KnowledgeGraph& kg, EntityId start,
                                    const RelationPath& rp, std::size_t fanout = kDefaultFanout);

// Triples touched within `hops` undirected steps of the seeds. Entity and
// relation ids are re-densified, preserving the original relative order.
KnowledgeGraph subgraph(const KnowledgeGraph& kg, std::span<const EntityId> seeds, int hops);

// Undirected BFS distance from the seed set; -1 when unreachable.
std::vector<int> hop_distances(const KnowledgeGraph& kg, std::span<const EntityId> seeds,
                               int max_hops);

}  // namespace kgpath
