#include "tlab/graph_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "tlab/apportion.hpp"
#include "tlab/error.hpp"
#include "tlab/names.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

// Zipf sampler over a pool; ranks are a seeded permutation of the pool.
class ZipfPool {
 public:
  ZipfPool(std::vector<EntityId> pool, double skew, Rng& rng) : pool_(std::move(pool)) {
    rng.shuffle(std::span<EntityId>(pool_));
    cumulative_.resize(pool_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
      acc += std::pow(static_cast<double>(i + 1), -skew);
      cumulative_[i] = acc;
    }
  }

  EntityId draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return pool_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<EntityId> pool_;
  std::vector<double> cumulative_;
};

}  // namespace

const std::vector<TypeSpec>& default_types() {
  static const std::vector<TypeSpec> types = {
      {"country", 0.05},    {"city", 0.15},  {"person", 0.35},   {"organization", 0.10},
      {"occupation", 0.05}, {"award", 0.05}, {"language", 0.05}, {"work", 0.20},
  };
  return types;
}

const std::vector<RelationSpec>& relation_catalog() {
  static const std::vector<RelationSpec> catalog = {
      {"place_of_birth", "person", "city"},
      {"place_of_death", "person", "city"},
      {"country_of_citizenship", "person", "country"},
      {"occupation", "person", "occupation"},
      {"employer", "person", "organization"},
      {"award_received", "person", "award"},
      {"spouse", "person", "person"},
      {"native_language", "person", "language"},
      {"educated_at", "person", "organization"},
      {"notable_work", "person", "work"},
      {"capital", "country", "city"},
      {"official_language", "country", "language"},
      {"head_of_government", "country", "person"},
      {"country", "city", "country"},
      {"headquarters_location", "organization", "city"},
      {"founded_by", "organization", "person"},
      {"screenwriter", "work", "person"},
      {"director", "work", "person"},
      {"original_language", "work", "language"},
      {"conferred_by", "award", "organization"},
      {"father", "person", "person"},
      {"mother", "person", "person"},
      {"sibling", "person", "person"},
      {"child", "person", "person"},
      {"member_of", "person", "organization"},
      {"field_of_work", "person", "occupation"},
      {"head_of_state", "country", "person"},
      {"shares_border_with", "country", "country"},
      {"anthem", "country", "work"},
      {"twinned_city", "city", "city"},
      {"country_of_registration", "organization", "country"},
      {"director_manager", "organization", "person"},
      {"country_of_origin", "work", "country"},
      {"author", "work", "person"},
      {"composer", "work", "person"},
      {"producer", "work", "person"},
      {"award_country", "award", "country"},
      {"parent_language", "language", "language"},
      {"indigenous_to", "language", "country"},
  };
  return catalog;
}

GraphGenConfig GraphGenConfig::desk(std::uint64_t seed) {
  GraphGenConfig c;
  c.n_entities = 1000;
  c.types = default_types();
  c.relations.assign(relation_catalog().begin(), relation_catalog().begin() + 20);
  c.target_edges = 5000;
  c.degree_skew = 0.5;
  c.communities = 50;
  c.community_mixing = 0.1;
  c.seed = seed;
  return c;
}

GraphGenConfig GraphGenConfig::reference(std::uint64_t seed) {
  GraphGenConfig c;
  c.n_entities = 25000;
  c.types = default_types();
  c.relations = relation_catalog();
  c.target_edges = 54500;
  c.degree_skew = 1.0;
  c.communities = 1000;
  c.community_mixing = 0.1;
  c.seed = seed;
  return c;
}

void GraphGenConfig::validate() const {
  if (n_entities == 0) throw ValidationError("n_entities must be positive");
  if (target_edges == 0) throw ValidationError("target_edges must be positive");
  if (types.empty()) throw ValidationError("type_spec is empty");
  if (!(degree_skew >= 0.0)) throw ValidationError("degree_skew must be non-negative");
  if (communities == 0) throw ValidationError("communities must be positive");
  if (!(community_mixing >= 0.0 && community_mixing <= 1.0)) {
    throw ValidationError("community_mixing must lie in [0, 1]");
  }
  double sum = 0.0;
  std::set<std::string> names;
  for (const auto& t : types) {
    if (t.name.empty()) throw ValidationError("type with empty name");
    if (!(t.fraction >= 0.0)) throw ValidationError("type '" + t.name + "': negative fraction");
    if (!names.insert(t.name).second) throw ValidationError("duplicate type '" + t.name + "'");
    sum += t.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("type fractions sum to " + std::to_string(sum) + ", expected 1");
  }
  if (relations.empty()) throw ValidationError("relation_spec is empty");

  std::vector<double> fractions;
  for (const auto& t : types) fractions.push_back(t.fraction);
  const auto counts = apportion(n_entities, fractions);
  std::unordered_map<std::string, std::size_t> count_of;
  for (std::size_t i = 0; i < types.size(); ++i) count_of[types[i].name] = counts[i];
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (counts[i] < 2) {
      throw ValidationError("type '" + types[i].name + "' receives " + std::to_string(counts[i]) +
                            " entities; at least 2 are needed for corruption");
    }
  }

  std::set<std::string> rel_names;
  double capacity = 0.0;
  for (const auto& r : relations) {
    if (!rel_names.insert(r.name).second) {
      throw ValidationError("duplicate relation '" + r.name + "'");
    }
    auto h = count_of.find(r.head_type);
    auto t = count_of.find(r.tail_type);
    if (h == count_of.end() || h->second == 0 || t == count_of.end() || t->second == 0) {
      throw ValidationError("relation '" + r.name + "' references a type with no entities");
    }
    const double tails = static_cast<double>(t->second) - (r.head_type == r.tail_type ? 1 : 0);
    capacity += static_cast<double>(h->second) * (functional ? 1.0 : tails);
  }
  if (static_cast<double>(target_edges) > capacity) {
    throw ValidationError("target_edges " + std::to_string(target_edges) +
                          " exceeds typed slot capacity " + std::to_string(capacity));
  }
}

KnowledgeGraph generate_graph(const GraphGenConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "graph_gen"));

  std::vector<double> fractions;
  for (const auto& t : config.types) fractions.push_back(t.fraction);
  const auto counts = apportion(config.n_entities, fractions);

  std::vector<Entity> entities;
  entities.reserve(config.n_entities);
  std::unordered_map<std::string, std::vector<EntityId>> pool_of;
  std::unordered_set<std::string> used_names;
  const std::uint64_t name_seed = derive_seed(config.seed, "names");
  for (std::size_t t = 0; t < config.types.size(); ++t) {
    const std::string& type = config.types[t].name;
    for (std::size_t i = 0; i < counts[t]; ++i) {
      const auto id = static_cast<EntityId>(entities.size());
      std::string name = pseudoword_name(name_seed, type, i);
      for (std::uint64_t attempt = 1; !used_names.insert(name).second; ++attempt) {
        name = pseudoword_name(derive_seed(name_seed, "redraw", attempt), type, i);
      }
      entities.push_back({id, std::move(name), type});
      pool_of[type].push_back(id);
    }
  }

  // Community membership: round-robin over a seeded shuffle of each type so
  // every community gets a share of every type.
  std::vector<std::size_t> community(entities.size(), 0);
  std::unordered_map<std::string, std::vector<std::vector<EntityId>>> community_pool;
  for (const auto& t : config.types) {
    std::vector<EntityId> shuffled = pool_of[t.name];
    rng.shuffle(std::span<EntityId>(shuffled));
    auto& buckets = community_pool[t.name];
    buckets.assign(config.communities, {});
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      community[shuffled[i]] = i % config.communities;
      buckets[i % config.communities].push_back(shuffled[i]);
    }
  }

  std::unordered_map<std::string, ZipfPool> head_sampler;
  for (const auto& t : config.types) {
    head_sampler.emplace(t.name, ZipfPool(pool_of[t.name], config.degree_skew, rng));
  }

  std::vector<Relation> relations;
  for (std::size_t r = 0; r < config.relations.size(); ++r) {
    relations.push_back({static_cast<RelationId>(r), config.relations[r].name});
  }

  std::set<Fact> facts;
  std::set<std::pair<EntityId, RelationId>> used_prefix;
  const std::size_t max_attempts = 100 * config.target_edges + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && facts.size() < config.target_edges;
       ++attempt) {
    const auto r = static_cast<RelationId>(rng.index(config.relations.size()));
    const RelationSpec& spec = config.relations[r];
    const EntityId head = head_sampler.at(spec.head_type).draw(rng);
    const std::vector<EntityId>* tails = &pool_of[spec.tail_type];
    if (!rng.bernoulli(config.community_mixing)) {
      const auto& local = community_pool[spec.tail_type][community[head]];
      if (!local.empty()) tails = &local;
    }
    const EntityId tail = (*tails)[rng.index(tails->size())];
    if (tail == head) continue;
    if (config.functional && used_prefix.count({head, r})) continue;
    if (facts.insert({head, r, tail}).second) used_prefix.insert({head, r});
  }
  const auto floor_count =
      static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(config.target_edges)));
  if (facts.size() < floor_count) {
    throw ValidationError("could only place " + std::to_string(facts.size()) + " of " +
                          std::to_string(config.target_edges) + " edges");
  }
  return KnowledgeGraph::build(std::move(entities), std::move(relations),
                               std::vector<Fact>(facts.begin(), facts.end()));
}

}  // namespace tlab
