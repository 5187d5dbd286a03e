#include "tlab/experts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

std::string fact_str(const Fact& f) {
  return "(" + std::to_string(f.head) + ", " + std::to_string(f.relation) + ", " +
         std::to_string(f.tail) + ")";
}

// Uniform entity of `type` other than `a` and `b`; nullopt if none exists.
std::optional<EntityId> substitute(const KnowledgeGraph& graph, const std::string& type,
                                   EntityId a, EntityId b, Rng& rng) {
  const auto pool = graph.entities_of_type(type);
  std::size_t excluded = 0;
  const bool has_a = graph.entity(a).type == type;
  const bool has_b = b != a && graph.entity(b).type == type;
  excluded = static_cast<std::size_t>(has_a) + static_cast<std::size_t>(has_b);
  if (pool.size() <= excluded) return std::nullopt;
  // Sample an index among the allowed entities without materializing them.
  std::size_t pick = rng.index(pool.size() - excluded);
  for (EntityId e : pool) {
    if ((has_a && e == a) || (has_b && e == b)) continue;
    if (pick == 0) return e;
    --pick;
  }
  return std::nullopt;
}

PersonalFact make_personal(const KnowledgeGraph& graph, std::size_t source, std::uint32_t cluster,
                           bool keep, std::uint64_t corruption_seed,
                           const ExpertOptions& options) {
  const Fact& f = graph.facts()[source];
  if (keep) return {f, source, cluster, false};
  try {
    return {corrupt_fact(graph, f, corruption_seed), source, cluster, true};
  } catch (const ValidationError&) {
    if (options.on_uncorruptible == OnUncorruptible::kKeepCorrect) {
      return {f, source, cluster, false};
    }
    throw;
  }
}

std::uint64_t corruption_seed(std::uint64_t master, std::uint64_t expert,
                              std::size_t source, const ExpertOptions& options) {
  if (options.misconceptions == Misconceptions::kShared) {
    return derive_seed(master, "misconception", source);
  }
  return derive_seed(expert, "corrupt", source);
}

}  // namespace

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kDenoising:
      return "denoising";
    case Setting::kSelection:
      return "selection";
    case Setting::kGeneralization:
      return "generalization";
  }
  return "unknown";
}

Setting parse_setting(const std::string& s) {
  if (s == "denoising") return Setting::kDenoising;
  if (s == "selection") return Setting::kSelection;
  if (s == "generalization") return Setting::kGeneralization;
  throw ValidationError("unknown setting '" + s + "'");
}

std::size_t ExpertProfile::corrupted_count() const {
  return static_cast<std::size_t>(
      std::count_if(facts.begin(), facts.end(), [](const PersonalFact& p) { return p.corrupted; }));
}

Fact corrupt_fact(const KnowledgeGraph& graph, const Fact& fact, std::uint64_t seed,
                  CorruptSide side) {
  Rng rng(seed);
  bool head_side = side == CorruptSide::kHead;
  if (side == CorruptSide::kAny) head_side = rng.bernoulli(0.5);
  auto try_side = [&](bool head) -> std::optional<Fact> {
    const EntityId replaced = head ? fact.head : fact.tail;
    const EntityId other = head ? fact.tail : fact.head;
    auto sub = substitute(graph, graph.entity(replaced).type, replaced, other, rng);
    if (!sub) return std::nullopt;
    Fact out = fact;
    (head ? out.head : out.tail) = *sub;
    return out;
  };
  if (auto f = try_side(head_side)) return *f;
  if (side == CorruptSide::kAny) {
    if (auto f = try_side(!head_side)) return *f;
  }
  throw ValidationError("uncorruptible fact " + fact_str(fact) +
                        ": no same-type substitute available");
}

std::uint64_t expert_seed(std::uint64_t master_seed, std::uint32_t expert_id) {
  return derive_seed(master_seed, "expert", expert_id);
}

std::vector<ExpertProfile> build_denoising_experts(const KnowledgeGraph& graph, std::size_t n_e,
                                                   double c, std::uint64_t seed,
                                                   const ExpertOptions& options) {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("coverage c must lie in [0, 1]");
  if (n_e < 1) throw ValidationError("n_e must be at least 1");
  std::vector<ExpertProfile> experts;
  experts.reserve(n_e);
  for (std::uint32_t i = 0; i < n_e; ++i) {
    ExpertProfile e;
    e.expert_id = i;
    e.setting = Setting::kDenoising;
    e.coverage = {c};
    e.seed = expert_seed(seed, i);
    Rng keep(derive_seed(e.seed, "keep"));
    e.facts.reserve(graph.num_facts());
    for (std::size_t s = 0; s < graph.num_facts(); ++s) {
      const bool kept = keep.bernoulli(c);
      e.facts.push_back(
          make_personal(graph, s, 0, kept, corruption_seed(seed, e.seed, s, options), options));
    }
    experts.push_back(std::move(e));
  }
  return experts;
}

std::vector<double> greedy_coverage_vector(const std::vector<std::size_t>& cluster_sizes,
                                           double c, std::uint64_t seed) {
  if (!(c > 0.0 && c <= 1.0)) throw ValidationError("coverage c must lie in (0, 1]");
  const double total =
      static_cast<double>(std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), 0ULL));
  double budget = c * total;
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < cluster_sizes.size(); ++j) {
    if (cluster_sizes[j] > 0) order.push_back(j);
  }
  Rng rng(derive_seed(seed, "coverage_order"));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<double> s(cluster_sizes.size(), 0.0);
  for (std::size_t j : order) {
    const auto size = static_cast<double>(cluster_sizes[j]);
    if (budget >= size - 1e-9) {
      s[j] = 1.0;
      budget -= size;
    } else {
      s[j] = std::max(0.0, budget / size);
      break;
    }
  }
  return s;
}

std::vector<ExpertProfile> build_experts_from_coverage(
    const KnowledgeGraph& graph, const EdgePartition& partition,
    const std::vector<std::vector<double>>& coverage, std::uint64_t seed,
    const ExpertOptions& options) {
  partition.validate(graph);
  std::vector<ExpertProfile> experts;
  experts.reserve(coverage.size());
  for (std::uint32_t i = 0; i < coverage.size(); ++i) {
    if (coverage[i].size() != partition.k) {
      throw ValidationError("coverage vector of expert " + std::to_string(i) + " has " +
                            std::to_string(coverage[i].size()) + " entries, expected k=" +
                            std::to_string(partition.k));
    }
    for (double s : coverage[i]) {
      if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("coverage entries must lie in [0, 1]");
    }
    ExpertProfile e;
    e.expert_id = i;
    e.setting = Setting::kSelection;
    e.coverage = coverage[i];
    e.seed = expert_seed(seed, i);
    Rng keep(derive_seed(e.seed, "keep"));
    e.facts.reserve(graph.num_facts());
    for (std::size_t s = 0; s < graph.num_facts(); ++s) {
      const std::uint32_t cluster = partition.assignment[s];
      const bool kept = keep.bernoulli(e.coverage[cluster]);
      e.facts.push_back(make_personal(graph, s, cluster, kept,
                                      corruption_seed(seed, e.seed, s, options), options));
    }
    experts.push_back(std::move(e));
  }
  return experts;
}

std::vector<ExpertProfile> build_selection_experts(const KnowledgeGraph& graph,
                                                   const EdgePartition& partition,
                                                   std::size_t n_e, double c, std::uint64_t seed,
                                                   const ExpertOptions& options) {
  if (n_e < 1) throw ValidationError("n_e must be at least 1");
  partition.validate(graph);
  std::vector<std::vector<double>> coverage;
  coverage.reserve(n_e);
  for (std::uint32_t i = 0; i < n_e; ++i) {
    coverage.push_back(greedy_coverage_vector(partition.sizes, c, expert_seed(seed, i)));
  }
  return build_experts_from_coverage(graph, partition, coverage, seed, options);
}

std::vector<ExpertProfile> build_generalization_experts(const KnowledgeGraph& graph,
                                                        const EdgePartition& partition) {
  partition.validate(graph);
  std::vector<ExpertProfile> experts;
  std::vector<std::int64_t> owner(partition.k, -1);
  for (std::uint32_t j = 0; j < partition.k; ++j) {
    if (partition.sizes[j] == 0) continue;
    owner[j] = static_cast<std::int64_t>(experts.size());
    ExpertProfile e;
    e.expert_id = static_cast<std::uint32_t>(experts.size());
    e.setting = Setting::kGeneralization;
    e.coverage.assign(partition.k, 0.0);
    e.coverage[j] = 1.0;
    experts.push_back(std::move(e));
  }
  for (std::size_t s = 0; s < graph.num_facts(); ++s) {
    const std::uint32_t cluster = partition.assignment[s];
    experts[owner[cluster]].facts.push_back({graph.facts()[s], s, cluster, false});
  }
  return experts;
}

double union_coverage(const KnowledgeGraph& graph, const std::vector<ExpertProfile>& experts) {
  if (graph.num_facts() == 0) return 0.0;
  std::vector<char> known(graph.num_facts(), 0);
  for (const auto& e : experts) {
    for (const auto& pf : e.facts) {
      if (!pf.corrupted) known[pf.source] = 1;
    }
  }
  return static_cast<double>(std::count(known.begin(), known.end(), 1)) /
         static_cast<double>(graph.num_facts());
}

std::string experts_to_json(const std::vector<ExpertProfile>& experts) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : experts) {
    nlohmann::ordered_json j;
    j["expert_id"] = e.expert_id;
    j["setting"] = to_string(e.setting);
    j["coverage_vector"] = e.coverage;
    // Built separately: ordered_json keeps members in a vector, so
    // references into j do not survive later insertions.
    auto facts = nlohmann::ordered_json::array();
    auto flags = nlohmann::ordered_json::array();
    auto sources = nlohmann::ordered_json::array();
    for (const auto& pf : e.facts) {
      facts.push_back({pf.fact.head, pf.fact.relation, pf.fact.tail});
      flags.push_back(pf.corrupted);
      sources.push_back(pf.source);
    }
    j["facts"] = std::move(facts);
    j["corrupted_flags"] = std::move(flags);
    j["sources"] = std::move(sources);
    j["seed"] = e.seed;
    doc.push_back(std::move(j));
  }
  return doc.dump() + "\n";
}

std::vector<ExpertProfile> experts_from_json(const std::string& text,
                                             const EdgePartition* partition) {
  auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) throw ValidationError("malformed expert-set JSON");
  std::vector<ExpertProfile> experts;
  try {
    for (const auto& j : doc) {
      ExpertProfile e;
      e.expert_id = j.at("expert_id").get<std::uint32_t>();
      e.setting = parse_setting(j.at("setting").get<std::string>());
      e.coverage = j.at("coverage_vector").get<std::vector<double>>();
      e.seed = j.value("seed", std::uint64_t{0});
      const auto& facts = j.at("facts");
      const auto& flags = j.at("corrupted_flags");
      const auto& sources = j.at("sources");
      if (facts.size() != flags.size() || facts.size() != sources.size()) {
        throw ValidationError("expert " + std::to_string(e.expert_id) +
                              ": facts/corrupted_flags/sources lengths differ");
      }
      for (std::size_t i = 0; i < facts.size(); ++i) {
        PersonalFact pf;
        pf.fact = {facts[i].at(0).get<EntityId>(), facts[i].at(1).get<RelationId>(),
                   facts[i].at(2).get<EntityId>()};
        pf.corrupted = flags[i].get<bool>();
        pf.source = sources[i].get<std::size_t>();
        if (e.setting != Setting::kDenoising) {
          if (partition == nullptr) {
            throw ValidationError("a partition is required to load clustered experts");
          }
          pf.cluster = partition->assignment.at(pf.source);
        }
        e.facts.push_back(pf);
      }
      experts.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed expert-set JSON: ") + ex.what());
  }
  return experts;
}

}  // namespace tlab
