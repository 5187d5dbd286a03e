#include "tlab/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

std::string fact_str(const Fact& f) {
  return "(" + std::to_string(f.head) + ", " + std::to_string(f.relation) + ", " +
         std::to_string(f.tail) + ")";
}

// Converts a byte offset into 1-based line/column.
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

KnowledgeGraph KnowledgeGraph::build(std::vector<Entity> entities, std::vector<Relation> relations,
                                     std::vector<Fact> facts) {
  KnowledgeGraph g;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const Entity& e = entities[i];
    if (e.id != i) {
      throw ValidationError("entity '" + e.name + "': id " + std::to_string(e.id) +
                            " is not dense (expected " + std::to_string(i) + ")");
    }
    if (e.type.empty()) {
      throw ValidationError("entity '" + e.name + "' (id " + std::to_string(e.id) +
                            "): empty semantic type");
    }
    if (!g.entity_by_name_.emplace(e.name, e.id).second) {
      throw ValidationError("duplicate entity name '" + e.name + "' (id " + std::to_string(e.id) +
                            ")");
    }
    g.type_index_[e.type].push_back(e.id);
  }
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const Relation& r = relations[i];
    if (r.id != i) {
      throw ValidationError("relation '" + r.name + "': id " + std::to_string(r.id) +
                            " is not dense (expected " + std::to_string(i) + ")");
    }
    if (!g.relation_by_name_.emplace(r.name, r.id).second) {
      throw ValidationError("duplicate relation name '" + r.name + "'");
    }
  }

  const auto n = static_cast<EntityId>(entities.size());
  const auto nr = static_cast<RelationId>(relations.size());
  for (const Fact& f : facts) {
    if (f.head >= n || f.tail >= n || f.relation >= nr) {
      throw ValidationError("dangling reference in fact " + fact_str(f));
    }
    if (f.head == f.tail) throw ValidationError("self-loop fact " + fact_str(f));
  }
  std::sort(facts.begin(), facts.end());
  if (auto dup = std::adjacent_find(facts.begin(), facts.end()); dup != facts.end()) {
    throw ValidationError("duplicate fact " + fact_str(*dup));
  }

  g.entities_ = std::move(entities);
  g.relations_ = std::move(relations);
  g.facts_ = std::move(facts);

  g.tails_.reserve(g.facts_.size());
  for (const Fact& f : g.facts_) g.tails_.push_back(f.tail);

  // CSR offsets: out-facts are contiguous in canonical order already.
  g.out_offsets_.assign(n + 1, 0);
  g.in_offsets_.assign(n + 1, 0);
  for (const Fact& f : g.facts_) {
    ++g.out_offsets_[f.head + 1];
    ++g.in_offsets_[f.tail + 1];
  }
  for (std::size_t v = 0; v < n; ++v) {
    g.out_offsets_[v + 1] += g.out_offsets_[v];
    g.in_offsets_[v + 1] += g.in_offsets_[v];
  }
  g.out_order_.resize(g.facts_.size());
  for (std::size_t i = 0; i < g.facts_.size(); ++i) g.out_order_[i] = i;
  g.in_order_.resize(g.facts_.size());
  std::vector<std::size_t> cursor(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
  for (std::size_t i = 0; i < g.facts_.size(); ++i) {
    g.in_order_[cursor[g.facts_[i].tail]++] = i;
  }
  return g;
}

const Entity& KnowledgeGraph::entity(EntityId id) const {
  if (id >= entities_.size()) throw ValidationError("unknown entity id " + std::to_string(id));
  return entities_[id];
}

const Relation& KnowledgeGraph::relation(RelationId id) const {
  if (id >= relations_.size()) throw ValidationError("unknown relation id " + std::to_string(id));
  return relations_[id];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
  auto it = entity_by_name_.find(std::string(name));
  if (it == entity_by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
  auto it = relation_by_name_.find(std::string(name));
  if (it == relation_by_name_.end()) return std::nullopt;
  return it->second;
}

std::pair<std::size_t, std::size_t> KnowledgeGraph::prefix_range(EntityId head,
                                                                 RelationId relation) const {
  const auto begin = facts_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[head]);
  const auto end = facts_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[head + 1]);
  auto lo = std::lower_bound(begin, end, Fact{head, relation, 0});
  auto hi = std::upper_bound(lo, end, relation,
                             [](RelationId r, const Fact& f) { return r < f.relation; });
  return {static_cast<std::size_t>(lo - facts_.begin()),
          static_cast<std::size_t>(hi - facts_.begin())};
}

std::span<const EntityId> KnowledgeGraph::answers(EntityId head, RelationId relation) const {
  if (head >= entities_.size()) throw ValidationError("unknown head " + std::to_string(head));
  if (relation >= relations_.size()) {
    throw ValidationError("unknown relation " + std::to_string(relation));
  }
  auto [lo, hi] = prefix_range(head, relation);
  return std::span<const EntityId>(tails_).subspan(lo, hi - lo);
}

bool KnowledgeGraph::contains(const Fact& f) const { return fact_index(f).has_value(); }

std::optional<std::size_t> KnowledgeGraph::fact_index(const Fact& f) const {
  auto it = std::lower_bound(facts_.begin(), facts_.end(), f);
  if (it == facts_.end() || *it != f) return std::nullopt;
  return static_cast<std::size_t>(it - facts_.begin());
}

std::span<const std::size_t> KnowledgeGraph::out_facts(EntityId v) const {
  return std::span<const std::size_t>(out_order_)
      .subspan(out_offsets_.at(v), out_offsets_.at(v + 1) - out_offsets_[v]);
}

std::span<const std::size_t> KnowledgeGraph::in_facts(EntityId v) const {
  return std::span<const std::size_t>(in_order_)
      .subspan(in_offsets_.at(v), in_offsets_.at(v + 1) - in_offsets_[v]);
}

std::span<const EntityId> KnowledgeGraph::entities_of_type(std::string_view type) const {
  auto it = type_index_.find(std::string(type));
  if (it == type_index_.end()) return {};
  return it->second;
}

std::vector<TwoHopFact> enumerate_two_hop(const KnowledgeGraph& graph) {
  const auto& facts = graph.facts();
  std::vector<TwoHopFact> out;
  for (EntityId bridge = 0; bridge < graph.num_entities(); ++bridge) {
    for (std::size_t in : graph.in_facts(bridge)) {
      for (std::size_t o : graph.out_facts(bridge)) {
        out.push_back({facts[in].head, facts[in].relation, facts[o].relation, bridge,
                       facts[o].tail});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t two_hop_path_count(const KnowledgeGraph& graph) {
  std::size_t total = 0;
  for (EntityId v = 0; v < graph.num_entities(); ++v) {
    total += graph.in_facts(v).size() * graph.out_facts(v).size();
  }
  return total;
}

DegreeProfile degree_profile(const KnowledgeGraph& graph) {
  DegreeProfile p;
  p.in_degree.assign(graph.num_entities(), 0);
  p.out_degree.assign(graph.num_entities(), 0);
  for (const Fact& f : graph.facts()) {
    ++p.out_degree[f.head];
    ++p.in_degree[f.tail];
  }
  p.total_in = graph.num_facts();
  p.total_out = graph.num_facts();
  return p;
}

std::string serialize(const KnowledgeGraph& graph) {
  nlohmann::ordered_json doc;
  auto& ents = doc["entities"] = nlohmann::ordered_json::array();
  for (const Entity& e : graph.entities()) {
    ents.push_back({{"id", e.id}, {"name", e.name}, {"type", e.type}});
  }
  auto& rels = doc["relations"] = nlohmann::ordered_json::array();
  for (const Relation& r : graph.relations()) rels.push_back({{"id", r.id}, {"name", r.name}});
  auto& facts = doc["facts"] = nlohmann::ordered_json::array();
  for (const Fact& f : graph.facts()) facts.push_back({f.head, f.relation, f.tail});
  return doc.dump() + "\n";
}

KnowledgeGraph deserialize(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = locate(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("graph JSON: ") + e.what(), line, col);
  }
  auto fail = [](const std::string& what) -> void {
    throw ValidationError("graph JSON: " + what);
  };
  if (!doc.is_object()) fail("top level must be an object");
  for (const char* key : {"entities", "relations", "facts"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      fail(std::string("missing array '") + key + "'");
    }
  }

  std::vector<Entity> entities;
  for (const auto& e : doc["entities"]) {
    if (!e.is_object() || !e.contains("id") || !e["id"].is_number_unsigned() ||
        !e.contains("name") || !e["name"].is_string() || !e.contains("type") ||
        !e["type"].is_string()) {
      fail("malformed entity record " + e.dump());
    }
    entities.push_back({e["id"].get<EntityId>(), e["name"].get<std::string>(),
                        e["type"].get<std::string>()});
  }
  std::vector<Relation> relations;
  for (const auto& r : doc["relations"]) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_number_unsigned() ||
        !r.contains("name") || !r["name"].is_string()) {
      fail("malformed relation record " + r.dump());
    }
    relations.push_back({r["id"].get<RelationId>(), r["name"].get<std::string>()});
  }
  std::vector<Fact> facts;
  facts.reserve(doc["facts"].size());
  for (const auto& f : doc["facts"]) {
    if (!f.is_array() || f.size() != 3 || !f[0].is_number_unsigned() ||
        !f[1].is_number_unsigned() || !f[2].is_number_unsigned()) {
      fail("malformed fact record " + f.dump());
    }
    facts.push_back({f[0].get<EntityId>(), f[1].get<RelationId>(), f[2].get<EntityId>()});
  }
  return KnowledgeGraph::build(std::move(entities), std::move(relations), std::move(facts));
}

KnowledgeGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open graph file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

void save_graph(const KnowledgeGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write graph file '" + path + "'");
  out << serialize(graph);
  if (!out) throw RuntimeError("failed writing graph file '" + path + "'");
}

std::uint64_t structure_hash(const KnowledgeGraph& graph) {
  std::uint64_t h = mix64(graph.num_entities());
  h = derive_seed(h, graph.num_relations());
  for (const Entity& e : graph.entities()) h = derive_seed(h, hash_string(e.type));
  for (const Fact& f : graph.facts()) h = derive_seed(h, f.head, f.relation, f.tail);
  return h;
}

}  // namespace tlab
