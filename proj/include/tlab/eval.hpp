#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/corpus.hpp"
#include "tlab/experts.hpp"
#include "tlab/gen_learner.hpp"
#include "tlab/kg.hpp"
#include "tlab/mixture.hpp"

namespace tlab {

// Fraction of queries (a, r1, r2) -> c with some one-hop fact (a, r, c).
double direct_connection_baseline(const KnowledgeGraph& graph, std::span<const TwoHopFact> queries);

// Fraction of queries whose (head, tail) pair is also the (head, tail) pair
// of some training two-hop fact. Not reported by default.
double two_hop_cooccurrence_baseline(std::span<const TwoHopFact> queries,
                                     std::span<const TwoHopFact> train);

// Predicts, for each query, the entity of the answer's type that is most
// often the tail of r2 (lowest id on ties); null if r2 has no such tail.
class MajorityRelationPredictor {
 public:
  explicit MajorityRelationPredictor(const KnowledgeGraph& graph);
  std::optional<EntityId> predict(RelationId r2, const std::string& type) const;

 private:
  const KnowledgeGraph* graph_;
  // Per relation: (tail, count), tails ascending.
  std::vector<std::vector<std::pair<EntityId, std::size_t>>> tail_counts_;
};

double majority_relation_baseline(const KnowledgeGraph& graph, std::span<const TwoHopFact> queries);

struct ReportRow {
  std::string experiment;
  std::string setting;
  std::size_t n_experts = 0;
  double coverage = 0.0;
  double alpha = 0.0;
  double temperature = 0.0;
  std::optional<std::size_t> d_size;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ReportRow&) const = default;
};

inline constexpr int kReportVersion = 1;

// "# report-version: 1", the column header, then one line per row.
std::string report_csv(std::span<const ReportRow> rows);
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);
std::vector<ReportRow> read_report_csv(std::istream& in);

struct ExperimentSpec {
  std::string id = "experiment";
  Setting setting = Setting::kDenoising;
  std::vector<std::size_t> n_experts = {10};
  std::vector<double> coverage = {0.2};
  std::vector<double> alpha = {0.0};
  std::vector<double> temperature = {0.0};
  std::vector<std::uint64_t> seeds = {0};

  // Learner for denoising/selection: the exact mixture, or a tabular fit on
  // a generated corpus of `total_samples`.
  MixtureKind learner = MixtureKind::kExact;
  std::size_t total_samples = 10000;
  ExpertPrior prior = ExpertPrior::kQuota;
  // Defaults to independent for denoising and shared for selection.
  std::optional<Misconceptions> misconceptions;
  OnUncorruptible on_uncorruptible = OnUncorruptible::kError;

  // Generalization.
  std::vector<std::size_t> kappa_comp = {64};
  std::size_t validation_size = 0;
  OneHopScope one_hop_scope = OneHopScope::kIncident;
  bool two_hop_cooccurrence = false;

  std::size_t workers = 1;

  void validate() const;
  Misconceptions effective_misconceptions() const;
};

// Denoising/selection rows per (seed, n_e, c, alpha, tau): accuracy,
// max_expert_reward, transcends. Generalization rows per (seed, kappa_comp):
// acc_within_val, acc_across, direct_connection, majority_relation,
// condition_holds, kind_compositional. Order is canonical regardless of
// worker count. Selection and generalization need a partition.
std::vector<ReportRow> run_experiment(const KnowledgeGraph& graph, const EdgePartition* partition,
                                      const ExperimentSpec& spec);

struct GeneralizationRun {
  GeneralizationOutcome outcome;
  TwoHopSets sets;
  double direct_val = 0.0;
  double direct_across = 0.0;
  double majority_val = 0.0;
  double majority_across = 0.0;
  double cooccurrence_across = 0.0;
  Hypothesis hypothesis;
};

// Split two-hops, train on the within-expertise train split, select by
// kappa, and score the held-out sets and both baselines.
GeneralizationRun run_generalization(const KnowledgeGraph& graph, const EdgePartition& partition,
                                     std::size_t validation_size, std::size_t kappa_comp,
                                     std::uint64_t seed,
                                     OneHopScope scope = OneHopScope::kIncident);

}  // namespace tlab
