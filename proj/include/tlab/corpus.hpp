#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/experts.hpp"
#include "tlab/kg.hpp"
#include "tlab/rng.hpp"
#include "tlab/text.hpp"

namespace tlab {

enum class QuotaMode { kEqual, kProportional };
enum class SampleKind { kOneHopParagraph, kTwoHopPlain, kTwoHopCot };
enum class Split { kTrain, kValidation, kTest };

std::string to_string(QuotaMode m);
std::string to_string(SampleKind k);
std::string to_string(Split s);
QuotaMode parse_quota_mode(const std::string& s);
SampleKind parse_sample_kind(const std::string& s);
Split parse_split(const std::string& s);

struct TwoHopConfig {
  bool include = false;
  std::size_t validation_size = 0;
  std::size_t train_repeat = 20;
  TwoHopFormat format = TwoHopFormat::kPlain;
};

struct CorpusConfig {
  std::size_t total_samples = 10000;
  QuotaMode quota_mode = QuotaMode::kEqual;
  double alpha = 0.0;
  int diversity_level = 1;
  TwoHopConfig two_hop;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct Sample {
  std::size_t idx = 0;
  std::string text;
  std::uint32_t expert_id = 0;
  EntityId entity_id = 0;
  SampleKind kind = SampleKind::kOneHopParagraph;
  Split split = Split::kTrain;
  int diversity = 1;
  // Ground-truth indices of the source facts, in sentence order.
  std::vector<std::size_t> fact_ids;
  std::vector<bool> corrupted;
  // Two-hop lines only: repetition index.
  std::optional<std::size_t> epoch;
  // Level 3/4 only: rephrasing failed and level-2 text was kept.
  bool fallback = false;

  bool operator==(const Sample&) const = default;
};

// Node-level view of an expert's personal graph.
struct PersonalGraph {
  // Nodes with at least one incident personal fact, ascending.
  std::vector<EntityId> nodes;
  // incident[k]: indices into expert.facts touching nodes[k] (either side),
  // in personal-fact order.
  std::vector<std::vector<std::uint32_t>> incident;

  static PersonalGraph build(const ExpertProfile& expert);
  std::optional<std::size_t> position(EntityId v) const;
};

// Probability that a personal fact is written when its paragraph is drawn:
// alpha * s + (1 - alpha) in the selection setting, 1 otherwise.
double emission_weight(const ExpertProfile& expert, const PersonalFact& pf, double alpha);

// One paragraph about `entity`: each incident fact is kept with its
// emission weight, kept sentences are shuffled. nullopt when filtering left
// nothing. Throws ValidationError("no incident facts") for isolated nodes.
std::optional<Sample> emit_paragraph(const KnowledgeGraph& graph, const ExpertProfile& expert,
                                     const PersonalGraph& pgraph, EntityId entity, double alpha,
                                     int diversity_level, Rng& rng);
std::optional<Sample> emit_paragraph(const KnowledgeGraph& graph, const ExpertProfile& expert,
                                     EntityId entity, double alpha, int diversity_level,
                                     std::uint64_t seed);

// Draws a paragraph conditioned on being non-empty. Distributionally equal
// to redrawing the entity until a paragraph survives filtering, without a
// retry bound. Throws ValidationError if the expert can emit nothing.
class ParagraphSampler {
 public:
  ParagraphSampler(const KnowledgeGraph& graph, const ExpertProfile& expert, double alpha,
                   int diversity_level);
  Sample draw(Rng& rng) const;
  const PersonalGraph& personal_graph() const { return pgraph_; }
  // Sum over nodes of P(paragraph non-empty).
  double total_mass() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

 private:
  const KnowledgeGraph* graph_;
  const ExpertProfile* expert_;
  double alpha_;
  int level_;
  PersonalGraph pgraph_;
  std::vector<double> cumulative_;
};

struct TwoHopSets {
  std::vector<TwoHopFact> train_within;
  std::vector<TwoHopFact> validation_within;
  std::vector<TwoHopFact> test_across;
};

// Validation is a uniform sample of the within-expertise set; every list
// keeps enumeration order.
TwoHopSets split_two_hops(const KnowledgeGraph& graph, const EdgePartition& partition,
                          std::size_t validation_size, std::uint64_t seed);

Sample two_hop_sample(const KnowledgeGraph& graph, const TwoHopFact& fact, TwoHopFormat format,
                      Split split, std::uint32_t expert_id);

// Rewrites a level 3/4 sample. Falls back to the given text (and sets the
// flag) if the provider returns nothing or drops an entity name.
Sample rephrase(Sample sample, const KnowledgeGraph& graph, RephraseProvider* provider,
                const std::vector<Fact>& mentioned);

struct Corpus {
  std::vector<Sample> samples;
  std::vector<std::size_t> quotas;
  TwoHopSets two_hops;
  std::size_t fallbacks = 0;
};

// Per-expert sample counts: equal (floor N/n_e, remainder to the lowest
// ids) or proportional to personal-graph size, by largest remainder.
std::vector<std::size_t> corpus_quotas(const std::vector<ExpertProfile>& experts,
                                       const CorpusConfig& config);

// Samples are numbered expert by expert; sample idx draws from
// derive_seed(seed, "sample", idx), so the output does not depend on the
// worker count. The provider, if any, must be safe to call concurrently.
Corpus generate_corpus(const KnowledgeGraph& graph, const std::vector<ExpertProfile>& experts,
                       const CorpusConfig& config, const EdgePartition* partition = nullptr,
                       RephraseProvider* provider = nullptr);

// Field order: idx, text, expert_id, entity_id, kind, split, diversity,
// fact_ids, corrupted, then epoch and fallback when present.
std::string sample_to_jsonl(const Sample& sample);
void write_jsonl(std::ostream& out, std::span<const Sample> samples);
// Throws ParseError with the 1-based line number of a malformed line.
std::vector<Sample> read_jsonl(std::istream& in);

// Validation and test two-hop lines (not part of the training stream).
std::vector<Sample> two_hop_manifest(const KnowledgeGraph& graph, const TwoHopSets& sets,
                                     const EdgePartition& partition,
                                     const std::vector<ExpertProfile>& experts,
                                     TwoHopFormat format);

}  // namespace tlab
