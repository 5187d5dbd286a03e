#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/kg.hpp"

namespace tlab {

enum class Setting { kDenoising, kSelection, kGeneralization };

std::string to_string(Setting s);
Setting parse_setting(const std::string& s);

// How a fact an expert gets wrong is corrupted. Independent: each expert
// draws its own substitute. Shared: the substitute is a function of the
// fact alone, so every expert wrong about it holds the same misconception.
enum class Misconceptions { kIndependent, kShared };
enum class OnUncorruptible { kError, kKeepCorrect };

// One entry of an expert's personal graph, derived from ground-truth fact
// `source` (canonical index). `cluster` is the source fact's cluster (0 in
// the denoising setting).
struct PersonalFact {
  Fact fact;
  std::size_t source = 0;
  std::uint32_t cluster = 0;
  bool corrupted = false;

  bool operator==(const PersonalFact&) const = default;
};

struct ExpertProfile {
  std::uint32_t expert_id = 0;
  Setting setting = Setting::kDenoising;
  // Denoising: {c}. Selection/generalization: one entry per cluster.
  std::vector<double> coverage;
  std::vector<PersonalFact> facts;
  std::uint64_t seed = 0;

  // Accuracy s of the expert on the cluster of `pf`.
  double coverage_of(const PersonalFact& pf) const {
    return setting == Setting::kDenoising ? coverage.at(0) : coverage.at(pf.cluster);
  }
  std::size_t corrupted_count() const;
  bool operator==(const ExpertProfile&) const = default;
};

struct ExpertOptions {
  Misconceptions misconceptions = Misconceptions::kIndependent;
  OnUncorruptible on_uncorruptible = OnUncorruptible::kError;
};

enum class CorruptSide { kAny, kHead, kTail };

// Replaces one endpoint with a uniformly chosen entity of the same type,
// distinct from both endpoints; relation is preserved. kAny picks a side
// uniformly and falls back to the other side if its pool is exhausted.
// Throws ValidationError("uncorruptible fact ...") when no substitute exists.
Fact corrupt_fact(const KnowledgeGraph& graph, const Fact& fact, std::uint64_t seed,
                  CorruptSide side = CorruptSide::kAny);

// Sub-seed of expert `expert_id` under a master seed; independent of n_e.
std::uint64_t expert_seed(std::uint64_t master_seed, std::uint32_t expert_id);

std::vector<ExpertProfile> build_denoising_experts(const KnowledgeGraph& graph, std::size_t n_e,
                                                   double c, std::uint64_t seed,
                                                   const ExpertOptions& options = {});

// Greedy concentrated coverage: clusters are visited in a seed-shuffled
// order and fully covered while the remaining budget c*|E| allows; the first
// cluster that does not fit receives the fractional remainder.
std::vector<double> greedy_coverage_vector(const std::vector<std::size_t>& cluster_sizes,
                                           double c, std::uint64_t seed);

std::vector<ExpertProfile> build_selection_experts(const KnowledgeGraph& graph,
                                                   const EdgePartition& partition,
                                                   std::size_t n_e, double c, std::uint64_t seed,
                                                   const ExpertOptions& options = {});

// Selection-style experts from explicit coverage vectors (one per expert).
std::vector<ExpertProfile> build_experts_from_coverage(
    const KnowledgeGraph& graph, const EdgePartition& partition,
    const std::vector<std::vector<double>>& coverage, std::uint64_t seed,
    const ExpertOptions& options = {});

// One uncorrupted expert per non-empty cluster, in cluster order.
std::vector<ExpertProfile> build_generalization_experts(const KnowledgeGraph& graph,
                                                        const EdgePartition& partition);

// Fraction of ground-truth facts held uncorrupted by at least one expert.
double union_coverage(const KnowledgeGraph& graph, const std::vector<ExpertProfile>& experts);

// Per expert {expert_id, setting, coverage_vector, facts, corrupted_flags,
// sources}; one JSON document for the whole set.
std::string experts_to_json(const std::vector<ExpertProfile>& experts);
std::vector<ExpertProfile> experts_from_json(const std::string& text,
                                             const EdgePartition* partition);

}  // namespace tlab
