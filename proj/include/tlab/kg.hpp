#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tlab {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Entity {
  EntityId id = 0;
  std::string name;
  std::string type;

  bool operator==(const Entity&) const = default;
};

struct Relation {
  RelationId id = 0;
  std::string name;

  bool operator==(const Relation&) const = default;
};

// Canonical order is (head, relation, tail) lexicographic.
struct Fact {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Fact&) const = default;
};

// (head, r1, bridge) and (bridge, r2, tail) are both facts of the graph.
struct TwoHopFact {
  EntityId head = 0;
  RelationId r1 = 0;
  RelationId r2 = 0;
  EntityId bridge = 0;
  EntityId tail = 0;

  auto operator<=>(const TwoHopFact&) const = default;
};

// A one-hop query: the fact with its tail removed.
struct QueryKey {
  EntityId head = 0;
  RelationId relation = 0;

  auto operator<=>(const QueryKey&) const = default;
  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(head) << 32) | relation;
  }
  static QueryKey unpack(std::uint64_t v) {
    return {static_cast<EntityId>(v >> 32), static_cast<RelationId>(v & 0xffffffffu)};
  }
};

struct DegreeProfile {
  std::vector<std::size_t> in_degree;
  std::vector<std::size_t> out_degree;
  std::size_t total_in = 0;
  std::size_t total_out = 0;
};

// Immutable ground-truth graph. Entity and relation ids are dense and equal
// to their position in the respective tables; facts are stored in canonical
// order, so a fact's index is stable for a given graph.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Validates and indexes. Throws ValidationError naming the offending record
  // on duplicate names, non-dense ids, empty types, dangling references,
  // self-loops or duplicate facts. Facts may be given in any order.
  static KnowledgeGraph build(std::vector<Entity> entities, std::vector<Relation> relations,
                              std::vector<Fact> facts);

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Fact>& facts() const { return facts_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_facts() const { return facts_.size(); }

  const Entity& entity(EntityId id) const;
  const Relation& relation(RelationId id) const;
  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  // Tails t with (head, relation, t) in E, ascending. Throws on unknown ids.
  std::span<const EntityId> answers(EntityId head, RelationId relation) const;
  std::span<const EntityId> answers(QueryKey key) const { return answers(key.head, key.relation); }
  bool contains(const Fact& f) const;
  std::optional<std::size_t> fact_index(const Fact& f) const;

  // Indices into facts() of the facts leaving / entering an entity.
  std::span<const std::size_t> out_facts(EntityId v) const;
  std::span<const std::size_t> in_facts(EntityId v) const;

  const std::map<std::string, std::vector<EntityId>>& type_index() const { return type_index_; }
  std::span<const EntityId> entities_of_type(std::string_view type) const;

  bool operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_ &&
           facts_ == other.facts_;
  }

 private:
  std::pair<std::size_t, std::size_t> prefix_range(EntityId head, RelationId relation) const;

  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<Fact> facts_;
  std::vector<EntityId> tails_;  // tails_[i] == facts_[i].tail
  std::vector<std::size_t> out_offsets_;
  std::vector<std::size_t> in_offsets_;
  std::vector<std::size_t> in_order_;
  std::vector<std::size_t> out_order_;
  std::map<std::string, std::vector<EntityId>> type_index_;
  std::unordered_map<std::string, EntityId> entity_by_name_;
  std::unordered_map<std::string, RelationId> relation_by_name_;
};

// All bridge-witnessed two-hop tuples, sorted by (head, r1, r2, bridge, tail).
std::vector<TwoHopFact> enumerate_two_hop(const KnowledgeGraph& graph);

// Number of two-hop paths counted with bridge multiplicity, sum_v in(v)*out(v).
std::size_t two_hop_path_count(const KnowledgeGraph& graph);

DegreeProfile degree_profile(const KnowledgeGraph& graph);

// Canonical JSON: {"entities":[{id,name,type}],"relations":[{id,name}],
// "facts":[[h,r,t],...]}, arrays sorted, newline-terminated.
std::string serialize(const KnowledgeGraph& graph);
KnowledgeGraph deserialize(std::string_view text);

KnowledgeGraph load_graph(const std::string& path);
void save_graph(const KnowledgeGraph& graph, const std::string& path);

// Hash of the id-level structure (types, relation count, facts); ignores names.
std::uint64_t structure_hash(const KnowledgeGraph& graph);

}  // namespace tlab
