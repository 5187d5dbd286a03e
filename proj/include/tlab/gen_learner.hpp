#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/kg.hpp"

namespace tlab {

// Prefixes with two or more tails; empty for a functional graph.
std::vector<QueryKey> functional_check(const KnowledgeGraph& graph);

// Input (head, r1, r2) with its label. `bridge` witnesses the derivation;
// `cluster` holds both hops.
struct TwoHopExample {
  EntityId head = 0;
  RelationId r1 = 0;
  RelationId r2 = 0;
  EntityId bridge = 0;
  EntityId label = 0;
  std::uint32_t cluster = 0;

  auto operator<=>(const TwoHopExample&) const = default;
};

TwoHopExample to_example(const TwoHopFact& t, std::uint32_t cluster = 0);

// Within-expertise examples, one per distinct input. Throws ValidationError
// on a non-functional graph.
std::vector<TwoHopExample> build_training_set(const KnowledgeGraph& graph,
                                              const EdgePartition& partition);

// sum_i sum_v d_in^(i)(v) * d_out^(i)(v): within-cluster two-hop paths
// counted with bridge multiplicity.
std::size_t within_path_count(const KnowledgeGraph& graph, const EdgePartition& partition);

enum class HypothesisKind { kMemorizer, kCompositional };
std::string to_string(HypothesisKind k);

// Which one-hop facts the compositional learner stores: those used by
// derivations of D, or all of F^(1).
enum class OneHopScope { kIncident, kFull };

struct Hypothesis {
  HypothesisKind kind = HypothesisKind::kMemorizer;
  // Memorizer: packed (head, r1, r2) -> label.
  std::unordered_map<std::uint64_t, EntityId> two_hop_table;
  // Compositional: packed (entity, relation) -> entity.
  std::unordered_map<std::uint64_t, EntityId> one_hop_table;
  std::size_t kappa_comp = 0;

  // Non-null entries, plus kappa_comp for compositional hypotheses.
  std::size_t kappa() const;
  std::optional<EntityId> apply(EntityId head, RelationId r1, RelationId r2) const;
};

// Throws ValidationError if two examples share an input but not a label.
Hypothesis fit_memorizer(std::span<const TwoHopExample> examples);
Hypothesis fit_compositional(const KnowledgeGraph& graph, std::span<const TwoHopExample> examples,
                             std::size_t kappa_comp, OneHopScope scope = OneHopScope::kIncident);

// Zero-training-error hypothesis of least kappa; ties go to compositional.
Hypothesis erm_select(std::span<const TwoHopExample> examples, const KnowledgeGraph& graph,
                      std::size_t kappa_comp, OneHopScope scope = OneHopScope::kIncident);
const Hypothesis& erm_select(const Hypothesis& memorizer, const Hypothesis& compositional);

struct ConditionReport {
  std::size_t lhs = 0;         // |F^(1)| + kappa_comp
  std::size_t rhs = 0;         // within-expertise path count
  std::size_t distinct_d = 0;  // deduplicated |D|
  bool holds = false;          // lhs < rhs
  bool holds_distinct = false; // lhs < distinct_d
};

ConditionReport sufficient_condition(const KnowledgeGraph& graph, const EdgePartition& partition,
                                     std::size_t kappa_comp);

// Exact-match accuracy; a null output is wrong. Empty query set gives 0.
double evaluate_two_hop(const Hypothesis& h, std::span<const TwoHopFact> queries);

std::string hypothesis_to_json(const Hypothesis& h);

struct GeneralizationOutcome {
  ConditionReport condition;
  HypothesisKind selected = HypothesisKind::kMemorizer;
  std::size_t d_size = 0;
  std::size_t t1_size = 0;
  std::size_t f1_size = 0;
  double acc_within_val = 0.0;
  double acc_across = 0.0;
};

// "lhs,rhs,holds,kind_selected,acc_within_val,acc_across"
std::string condition_csv_header();
std::string condition_csv_row(const GeneralizationOutcome& o);

}  // namespace tlab
