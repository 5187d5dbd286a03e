#pragma once

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tlab/kg.hpp"
#include "tlab/rng.hpp"

namespace tlab::testing {

// Graph from (name, type) entities, relation names and (head, relation,
// tail) name triples.
inline KnowledgeGraph make_graph(
    const std::vector<std::pair<std::string, std::string>>& entities,
    const std::vector<std::string>& relations,
    const std::vector<std::tuple<std::string, std::string, std::string>>& facts) {
  std::vector<Entity> es;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    es.push_back({static_cast<EntityId>(i), entities[i].first, entities[i].second});
  }
  std::vector<Relation> rs;
  for (std::size_t i = 0; i < relations.size(); ++i) {
    rs.push_back({static_cast<RelationId>(i), relations[i]});
  }
  auto eid = [&](const std::string& n) {
    for (const auto& e : es) {
      if (e.name == n) return e.id;
    }
    return static_cast<EntityId>(es.size() + 1000);  // dangling on purpose
  };
  auto rid = [&](const std::string& n) {
    for (const auto& r : rs) {
      if (r.name == n) return r.id;
    }
    return static_cast<RelationId>(rs.size() + 1000);
  };
  std::vector<Fact> fs;
  for (const auto& [h, r, t] : facts) fs.push_back({eid(h), rid(r), eid(t)});
  return KnowledgeGraph::build(es, rs, fs);
}

// Uniform random graph over one type; no self-loops or duplicates.
inline KnowledgeGraph random_graph(std::size_t n_entities, std::size_t n_relations,
                                   std::size_t n_facts, std::uint64_t seed,
                                   std::size_t n_types = 1) {
  Rng rng(seed);
  std::vector<Entity> es;
  for (std::size_t i = 0; i < n_entities; ++i) {
    es.push_back({static_cast<EntityId>(i), "E" + std::to_string(i),
                  "t" + std::to_string(i % n_types)});
  }
  std::vector<Relation> rs;
  for (std::size_t i = 0; i < n_relations; ++i) {
    rs.push_back({static_cast<RelationId>(i), "rel_" + std::to_string(i)});
  }
  std::vector<Fact> fs;
  std::vector<char> seen(n_entities * n_entities * n_relations, 0);
  while (fs.size() < n_facts) {
    const auto h = static_cast<EntityId>(rng.index(n_entities));
    const auto t = static_cast<EntityId>(rng.index(n_entities));
    const auto r = static_cast<RelationId>(rng.index(n_relations));
    const std::size_t key = (h * n_entities + t) * n_relations + r;
    if (h == t || seen[key]) continue;
    seen[key] = 1;
    fs.push_back({h, r, t});
  }
  return KnowledgeGraph::build(es, rs, fs);
}

}  // namespace tlab::testing
