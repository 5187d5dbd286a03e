#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/corpus.hpp"
#include "tlab/experts.hpp"
#include "tlab/kg.hpp"
#include "tlab/rng.hpp"

namespace tlab {

struct TailProb {
  EntityId tail = 0;
  double p = 0.0;

  bool operator==(const TailProb&) const = default;
};

// Prefix -> distribution over tails, stored flat and sorted by packed key.
// `mass` keeps the unnormalized total per prefix (emission rate for expert
// components, count for empirical tables).
class ConditionalTable {
 public:
  struct Entry {
    std::uint64_t key;
    EntityId tail;
    double weight;
  };
  // Merges duplicate (key, tail) entries and normalizes per key. Entries
  // with zero weight are dropped.
  static ConditionalTable from_entries(std::vector<Entry> entries);

  std::size_t size() const { return keys_.size(); }
  QueryKey key(std::size_t i) const { return QueryKey::unpack(keys_[i]); }
  std::span<const TailProb> at(std::size_t i) const;
  double mass(std::size_t i) const { return mass_[i]; }
  std::optional<std::size_t> find(QueryKey key) const;
  std::span<const TailProb> conditional(QueryKey key) const;  // empty if absent
  double mass(QueryKey key) const;                             // 0 if absent

 private:
  std::vector<std::uint64_t> keys_;
  std::vector<double> mass_;
  std::vector<std::size_t> offsets_;
  std::vector<TailProb> probs_;
};

// Test distribution over one-hop queries; reward is 1 iff the answer is a
// ground-truth tail of the query.
struct RewardSpec {
  std::vector<std::pair<QueryKey, double>> queries;  // sorted by key

  // Each ground-truth fact contributes 1/|E| to its prefix.
  static RewardSpec uniform_over_facts(const KnowledgeGraph& graph);
  void validate() const;
};

enum class MixtureKind { kExact, kEmpirical };
enum class ExpertPrior { kQuota, kUniform };

std::string to_string(MixtureKind k);

class MixtureModel {
 public:
  MixtureKind kind = MixtureKind::kEmpirical;
  ConditionalTable table;
  // Exact models only: expert weights u_i and per-expert components, whose
  // masses are the emission rates p_i(x).
  std::vector<double> weights;
  std::vector<ConditionalTable> components;

  std::span<const TailProb> conditional(QueryKey key) const { return table.conditional(key); }
  // Posterior over experts given a prefix; the prior u when no expert emits it.
  double posterior(std::size_t expert, QueryKey key) const;
  // Max deviation of any stored conditional from summing to one.
  double normalization_error() const;
};

// Per-sample emission rate of each personal fact: each fact appears in the
// paragraphs of both endpoints, and a node's paragraph survives filtering
// with probability 1 - prod(1 - w) over its incident facts, so
//   rate(e) = 2 w(e) / sum_v (1 - prod_{e' ~ v} (1 - w(e'))).
// With all weights 1 this is 2 / |V_i|.
ConditionalTable expert_component(const ExpertProfile& expert, double alpha);

// u_i: quota shares of the corpus, or uniform.
std::vector<double> expert_weights(const std::vector<ExpertProfile>& experts,
                                   const CorpusConfig& config, ExpertPrior prior);

MixtureModel exact_mixture(const std::vector<ExpertProfile>& experts, double alpha,
                           const std::vector<double>& weights);
MixtureModel exact_mixture(const std::vector<ExpertProfile>& experts, const CorpusConfig& config,
                           ExpertPrior prior = ExpertPrior::kQuota);

// Tabular MLE: sentence counts per (prefix, tail). Two-hop lines are
// ignored. Text is parsed with the template grammar.
MixtureModel fit_empirical(const KnowledgeGraph& graph, std::span<const Sample> samples);
// Streaming JSONL variant; ParseError carries the offending line number.
MixtureModel fit_empirical(const KnowledgeGraph& graph, std::istream& jsonl);

// tau = 0: argmax, lowest tail id on ties. tau > 0: sample from p^(1/tau)
// renormalized. nullopt for unseen prefixes. Throws on negative tau.
std::optional<EntityId> predict(const MixtureModel& model, QueryKey key, double temperature,
                                Rng& rng);
std::optional<EntityId> argmax_tail(std::span<const TailProb> dist);
// The conditional raised to 1/tau and renormalized; tau = 0 gives the
// argmax point mass.
std::vector<TailProb> tempered(std::span<const TailProb> dist, double temperature);

// Fraction of ground-truth facts whose prediction is a true tail; one draw
// per fact from derive_seed(seed, "query", fact index).
double query_accuracy(const MixtureModel& model, const KnowledgeGraph& graph, double temperature,
                      std::uint64_t seed);
// Closed-form expected reward sum_x p(x) sum_y f_tau(y|x) r(x, y).
double expected_reward(const MixtureModel& model, const KnowledgeGraph& graph,
                       const RewardSpec& spec, double temperature);

// r_x(f) for a single conditional: probability mass on true tails.
double query_reward(std::span<const TailProb> dist, const KnowledgeGraph& graph, QueryKey key);

// R(f_i) under the expert's own emission distribution; 0 on prefixes the
// expert never emits.
double expert_reward(const KnowledgeGraph& graph, const ExpertProfile& expert,
                     const RewardSpec& spec, double alpha);
double component_reward(const KnowledgeGraph& graph, const ConditionalTable& component,
                        const RewardSpec& spec);

struct TwoExpertTerm {
  double p = 0.0;    // p_test(x)
  double r_a = 0.0;  // r_x(f_a)
  double r_b = 0.0;
  double g_a = 0.0;  // g(a|x)
  double g_b = 0.0;
};

// E_x[(r_x(f_a) - r_x(f_b)) (g(a|x) - g(b|x))]. Throws ValidationError if
// some g(a|x) + g(b|x) is not 1 within 1e-9.
double two_expert_statistic(std::span<const TwoExpertTerm> terms);
std::vector<TwoExpertTerm> two_expert_terms(const KnowledgeGraph& graph, const MixtureModel& model,
                                            const RewardSpec& spec);

struct TranscendenceReport {
  double model_reward = 0.0;
  std::vector<double> expert_rewards;
  double max_expert_reward = 0.0;
  bool transcends = false;
  std::optional<double> statistic;  // two-expert exact models only
};

TranscendenceReport transcendence_report(const KnowledgeGraph& graph, const MixtureModel& model,
                                         const RewardSpec& spec, double temperature);

// {"kind":...,"prefixes":[{"head":h,"relation":r,"tails":[[t,p],...]},...]}
std::string model_to_json(const MixtureModel& model);

}  // namespace tlab
