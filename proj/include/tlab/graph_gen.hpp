#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlab/kg.hpp"

namespace tlab {

struct TypeSpec {
  std::string name;
  double fraction = 0.0;
};

struct RelationSpec {
  std::string name;
  std::string head_type;
  std::string tail_type;
};

struct GraphGenConfig {
  std::size_t n_entities = 1000;
  std::vector<TypeSpec> types;
  std::vector<RelationSpec> relations;
  std::size_t target_edges = 5000;
  // Zipf exponent for head selection within a type; 0 is uniform.
  double degree_skew = 1.0;
  // Latent topical communities. With probability 1 - community_mixing a
  // tail is drawn from the head's own community.
  std::size_t communities = 1;
  double community_mixing = 1.0;
  // At most one tail per (head, relation).
  bool functional = false;
  std::uint64_t seed = 0;

  // Throws ValidationError on bad fractions, unknown/empty relation types or
  // an edge target above the typed slot capacity.
  void validate() const;

  // 1,000 entities, 8 types, the first 20 catalog relations, 5,000 edges.
  static GraphGenConfig desk(std::uint64_t seed = 0);
  // 25,000 entities, 39 relations, 54,500 edges.
  static GraphGenConfig reference(std::uint64_t seed = 0);
};

// The 39-relation typed catalog over the 8 built-in semantic types.
const std::vector<RelationSpec>& relation_catalog();
const std::vector<TypeSpec>& default_types();

// Entities are laid out type by type in config order. Edge count lands
// within 1% of target_edges or ValidationError is thrown.
KnowledgeGraph generate_graph(const GraphGenConfig& config);

}  // namespace tlab
