#include "tlab/corpus.hpp"

#include <algorithm>
#include <iostream>
#include <istream>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "tlab/apportion.hpp"
#include "tlab/error.hpp"

namespace tlab {
namespace {

std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

// Renders the chosen personal facts (already in final order) into a sample.
Sample render_paragraph(const KnowledgeGraph& graph, const ExpertProfile& expert, EntityId entity,
                        const std::vector<std::uint32_t>& chosen, int level, Rng& rng) {
  Sample s;
  s.expert_id = expert.expert_id;
  s.entity_id = entity;
  s.kind = SampleKind::kOneHopParagraph;
  s.diversity = level;
  std::vector<std::string> sentences;
  sentences.reserve(chosen.size());
  for (std::uint32_t i : chosen) {
    const PersonalFact& pf = expert.facts[i];
    sentences.push_back(render_sentence(graph, pf.fact, level, rng));
    s.fact_ids.push_back(pf.source);
    s.corrupted.push_back(pf.corrupted);
  }
  s.text = join_sentences(sentences);
  return s;
}

// Owner of each cluster: the expert with the highest coverage on it,
// lowest id on ties.
std::vector<std::uint32_t> cluster_owners(const EdgePartition& partition,
                                          const std::vector<ExpertProfile>& experts) {
  std::vector<std::uint32_t> owner(partition.k, 0);
  for (std::size_t j = 0; j < partition.k; ++j) {
    double best = -1.0;
    for (const auto& e : experts) {
      const double s = j < e.coverage.size() ? e.coverage[j] : 0.0;
      if (s > best) {
        best = s;
        owner[j] = e.expert_id;
      }
    }
  }
  return owner;
}

std::uint32_t two_hop_owner(const KnowledgeGraph& graph, const TwoHopFact& t,
                            const EdgePartition& partition,
                            const std::vector<std::uint32_t>& owners) {
  const auto first = graph.fact_index({t.head, t.r1, t.bridge});
  return owners[partition.assignment[*first]];
}

}  // namespace

std::string to_string(QuotaMode m) { return m == QuotaMode::kEqual ? "equal" : "proportional"; }

std::string to_string(SampleKind k) {
  switch (k) {
    case SampleKind::kOneHopParagraph:
      return "one_hop_paragraph";
    case SampleKind::kTwoHopPlain:
      return "two_hop_plain";
    case SampleKind::kTwoHopCot:
      return "two_hop_cot";
  }
  return "unknown";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

QuotaMode parse_quota_mode(const std::string& s) {
  if (s == "equal") return QuotaMode::kEqual;
  if (s == "proportional") return QuotaMode::kProportional;
  throw ValidationError("unknown quota mode '" + s + "'");
}

SampleKind parse_sample_kind(const std::string& s) {
  if (s == "one_hop_paragraph") return SampleKind::kOneHopParagraph;
  if (s == "two_hop_plain") return SampleKind::kTwoHopPlain;
  if (s == "two_hop_cot") return SampleKind::kTwoHopCot;
  throw ValidationError("unknown sample kind '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "'");
}

void CorpusConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (diversity_level < 1 || diversity_level > 4) {
    throw ValidationError("unknown diversity level " + std::to_string(diversity_level));
  }
  if (workers < 1) throw ValidationError("workers must be at least 1");
}

PersonalGraph PersonalGraph::build(const ExpertProfile& expert) {
  std::vector<std::vector<std::uint32_t>> by_node;
  EntityId max_id = 0;
  for (const auto& pf : expert.facts) max_id = std::max({max_id, pf.fact.head, pf.fact.tail});
  if (!expert.facts.empty()) by_node.resize(static_cast<std::size_t>(max_id) + 1);
  for (std::uint32_t i = 0; i < expert.facts.size(); ++i) {
    by_node[expert.facts[i].fact.head].push_back(i);
    by_node[expert.facts[i].fact.tail].push_back(i);
  }
  PersonalGraph g;
  for (EntityId v = 0; v < by_node.size(); ++v) {
    if (by_node[v].empty()) continue;
    g.nodes.push_back(v);
    g.incident.push_back(std::move(by_node[v]));
  }
  return g;
}

std::optional<std::size_t> PersonalGraph::position(EntityId v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

double emission_weight(const ExpertProfile& expert, const PersonalFact& pf, double alpha) {
  if (expert.setting != Setting::kSelection) return 1.0;
  return alpha * expert.coverage_of(pf) + (1.0 - alpha);
}

std::optional<Sample> emit_paragraph(const KnowledgeGraph& graph, const ExpertProfile& expert,
                                     const PersonalGraph& pgraph, EntityId entity, double alpha,
                                     int diversity_level, Rng& rng) {
  const auto pos = pgraph.position(entity);
  if (!pos) {
    throw ValidationError("no incident facts for entity " + std::to_string(entity) +
                          " in expert " + std::to_string(expert.expert_id));
  }
  std::vector<std::uint32_t> chosen;
  for (std::uint32_t i : pgraph.incident[*pos]) {
    if (rng.bernoulli(emission_weight(expert, expert.facts[i], alpha))) chosen.push_back(i);
  }
  if (chosen.empty()) return std::nullopt;
  rng.shuffle(std::span<std::uint32_t>(chosen));
  return render_paragraph(graph, expert, entity, chosen, diversity_level, rng);
}

std::optional<Sample> emit_paragraph(const KnowledgeGraph& graph, const ExpertProfile& expert,
                                     EntityId entity, double alpha, int diversity_level,
                                     std::uint64_t seed) {
  Rng rng(seed);
  return emit_paragraph(graph, expert, PersonalGraph::build(expert), entity, alpha,
                        diversity_level, rng);
}

ParagraphSampler::ParagraphSampler(const KnowledgeGraph& graph, const ExpertProfile& expert,
                                   double alpha, int diversity_level)
    : graph_(&graph),
      expert_(&expert),
      alpha_(alpha),
      level_(diversity_level),
      pgraph_(PersonalGraph::build(expert)) {
  double acc = 0.0;
  cumulative_.reserve(pgraph_.nodes.size());
  for (const auto& inc : pgraph_.incident) {
    double none = 1.0;
    for (std::uint32_t i : inc) none *= 1.0 - emission_weight(expert, expert.facts[i], alpha);
    acc += 1.0 - none;
    cumulative_.push_back(acc);
  }
  if (acc <= 0.0) {
    throw ValidationError("expert " + std::to_string(expert.expert_id) +
                          " has no emittable facts at alpha=" + std::to_string(alpha));
  }
}

Sample ParagraphSampler::draw(Rng& rng) const {
  // Node with probability proportional to P(non-empty paragraph).
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t k = static_cast<std::size_t>(it - cumulative_.begin());
  // Guard against rounding at the top and zero-mass nodes.
  if (k >= cumulative_.size()) k = cumulative_.size() - 1;
  while (k > 0 && cumulative_[k] == cumulative_[k - 1]) --k;
  const auto& inc = pgraph_.incident[k];

  std::vector<double> w(inc.size());
  for (std::size_t j = 0; j < inc.size(); ++j) {
    w[j] = emission_weight(*expert_, expert_->facts[inc[j]], alpha_);
  }
  // Index of the first kept fact given at least one is kept, then the rest
  // independently.
  double none = 1.0;
  for (double x : w) none *= 1.0 - x;
  double target = rng.uniform() * (1.0 - none);
  std::size_t first = inc.size();
  double prefix_none = 1.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < inc.size(); ++j) {
    const double mass = prefix_none * w[j];
    if (w[j] > 0.0) last_positive = j;
    if (target < mass) {
      first = j;
      break;
    }
    target -= mass;
    prefix_none *= 1.0 - w[j];
  }
  if (first == inc.size()) first = last_positive;
  std::vector<std::uint32_t> chosen = {inc[first]};
  for (std::size_t j = first + 1; j < inc.size(); ++j) {
    if (rng.bernoulli(w[j])) chosen.push_back(inc[j]);
  }
  rng.shuffle(std::span<std::uint32_t>(chosen));
  return render_paragraph(*graph_, *expert_, pgraph_.nodes[k], chosen, level_, rng);
}

TwoHopSets split_two_hops(const KnowledgeGraph& graph, const EdgePartition& partition,
                          std::size_t validation_size, std::uint64_t seed) {
  auto split = within_cluster_two_hops(graph, partition);
  if (validation_size > split.within.size()) {
    throw ValidationError("validation_size " + std::to_string(validation_size) +
                          " exceeds the " + std::to_string(split.within.size()) +
                          " within-expertise two-hop facts");
  }
  std::vector<std::size_t> order(split.within.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "two_hop_split"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<char> is_val(order.size(), 0);
  for (std::size_t i = 0; i < validation_size; ++i) is_val[order[i]] = 1;

  TwoHopSets out;
  for (std::size_t i = 0; i < split.within.size(); ++i) {
    (is_val[i] ? out.validation_within : out.train_within).push_back(split.within[i]);
  }
  out.test_across = std::move(split.across);
  return out;
}

Sample two_hop_sample(const KnowledgeGraph& graph, const TwoHopFact& fact, TwoHopFormat format,
                      Split split, std::uint32_t expert_id) {
  Sample s;
  s.text = two_hop_sentence(graph, fact, format);
  s.expert_id = expert_id;
  s.entity_id = fact.head;
  s.kind = format == TwoHopFormat::kCot ? SampleKind::kTwoHopCot : SampleKind::kTwoHopPlain;
  s.split = split;
  s.diversity = 1;
  s.fact_ids = {*graph.fact_index({fact.head, fact.r1, fact.bridge}),
                *graph.fact_index({fact.bridge, fact.r2, fact.tail})};
  s.corrupted = {false, false};
  return s;
}

Sample rephrase(Sample sample, const KnowledgeGraph& graph, RephraseProvider* provider,
                const std::vector<Fact>& mentioned) {
  std::vector<std::string> names;
  for (const Fact& f : mentioned) {
    names.push_back(graph.entity(f.head).name);
    names.push_back(graph.entity(f.tail).name);
  }
  std::optional<std::string> text;
  if (provider != nullptr) text = provider->rephrase(sample.text, sample.diversity);
  if (text && retains_names(*text, names)) {
    sample.text = std::move(*text);
  } else {
    sample.fallback = true;
  }
  return sample;
}

std::vector<std::size_t> corpus_quotas(const std::vector<ExpertProfile>& experts,
                                       const CorpusConfig& config) {
  if (experts.empty()) throw ValidationError("no experts");
  std::vector<double> w(experts.size(), 1.0);
  if (config.quota_mode == QuotaMode::kProportional) {
    for (std::size_t i = 0; i < experts.size(); ++i) {
      w[i] = static_cast<double>(experts[i].facts.size());
    }
  }
  return apportion(config.total_samples, w);
}

Corpus generate_corpus(const KnowledgeGraph& graph, const std::vector<ExpertProfile>& experts,
                       const CorpusConfig& config, const EdgePartition* partition,
                       RephraseProvider* provider) {
  config.validate();
  Corpus corpus;
  corpus.quotas = corpus_quotas(experts, config);

  std::vector<ParagraphSampler> samplers;
  samplers.reserve(experts.size());
  for (const auto& e : experts) {
    if (e.facts.empty()) {
      throw ValidationError("expert " + std::to_string(e.expert_id) + " has an empty personal graph");
    }
    samplers.emplace_back(graph, e, config.alpha, std::min(config.diversity_level, 2));
  }

  // owner_of[idx] is the expert producing sample idx.
  std::vector<std::uint32_t> owner_of;
  owner_of.reserve(config.total_samples);
  for (std::uint32_t i = 0; i < experts.size(); ++i) {
    owner_of.insert(owner_of.end(), corpus.quotas[i], i);
  }

  const bool rephrasing = config.diversity_level >= 3;
  corpus.samples.resize(owner_of.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      Rng rng(derive_seed(config.seed, "sample", idx));
      const ParagraphSampler& sampler = samplers[owner_of[idx]];
      Sample s = sampler.draw(rng);
      s.idx = idx;
      if (rephrasing) {
        s.diversity = config.diversity_level;
        std::vector<Fact> mentioned;
        const auto& facts = experts[owner_of[idx]].facts;
        for (std::size_t k = 0; k < s.fact_ids.size(); ++k) {
          // Source index identifies the personal fact within its expert.
          const std::size_t src = s.fact_ids[k];
          if (src < facts.size() && facts[src].source == src) {
            mentioned.push_back(facts[src].fact);
            continue;
          }
          for (const auto& pf : facts) {
            if (pf.source == src) {
              mentioned.push_back(pf.fact);
              break;
            }
          }
        }
        s = rephrase(std::move(s), graph, provider, mentioned);
      }
      corpus.samples[idx] = std::move(s);
    }
  };
  const std::size_t n = owner_of.size();
  const std::size_t workers = std::min(config.workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk);
      const std::size_t e = std::min(n, b + chunk);
      threads.emplace_back(work, b, e);
    }
    for (auto& t : threads) t.join();
  }
  for (const auto& s : corpus.samples) corpus.fallbacks += s.fallback ? 1 : 0;
  if (rephrasing && provider == nullptr) {
    std::cerr << "warning: no rephrase provider configured; level " << config.diversity_level
              << " samples use level-2 text\n";
  }

  if (config.two_hop.include) {
    if (partition == nullptr) throw ValidationError("two-hop emission requires a partition");
    corpus.two_hops = split_two_hops(graph, *partition, config.two_hop.validation_size,
                                     derive_seed(config.seed, "two_hop"));
    const auto owners = cluster_owners(*partition, experts);
    std::size_t idx = corpus.samples.size();
    for (std::size_t epoch = 0; epoch < config.two_hop.train_repeat; ++epoch) {
      for (const auto& t : corpus.two_hops.train_within) {
        Sample s = two_hop_sample(graph, t, config.two_hop.format, Split::kTrain,
                                  two_hop_owner(graph, t, *partition, owners));
        s.idx = idx++;
        s.epoch = epoch;
        corpus.samples.push_back(std::move(s));
      }
    }
  }
  return corpus;
}

std::vector<Sample> two_hop_manifest(const KnowledgeGraph& graph, const TwoHopSets& sets,
                                     const EdgePartition& partition,
                                     const std::vector<ExpertProfile>& experts,
                                     TwoHopFormat format) {
  const auto owners = cluster_owners(partition, experts);
  std::vector<Sample> out;
  std::size_t idx = 0;
  auto add = [&](const std::vector<TwoHopFact>& facts, Split split) {
    for (const auto& t : facts) {
      Sample s = two_hop_sample(graph, t, format, split, two_hop_owner(graph, t, partition, owners));
      s.idx = idx++;
      out.push_back(std::move(s));
    }
  };
  add(sets.validation_within, Split::kValidation);
  add(sets.test_across, Split::kTest);
  return out;
}

std::string sample_to_jsonl(const Sample& s) {
  nlohmann::ordered_json j;
  j["idx"] = s.idx;
  j["text"] = s.text;
  j["expert_id"] = s.expert_id;
  j["entity_id"] = s.entity_id;
  j["kind"] = to_string(s.kind);
  j["split"] = to_string(s.split);
  j["diversity"] = s.diversity;
  j["fact_ids"] = s.fact_ids;
  j["corrupted"] = s.corrupted;
  if (s.epoch) j["epoch"] = *s.epoch;
  if (s.fallback) j["fallback"] = true;
  return j.dump() + "\n";
}

void write_jsonl(std::ostream& out, std::span<const Sample> samples) {
  for (const auto& s : samples) out << sample_to_jsonl(s);
}

std::vector<Sample> read_jsonl(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("malformed corpus line", lineno, 1);
    try {
      Sample s;
      s.idx = j.at("idx").get<std::size_t>();
      s.text = j.at("text").get<std::string>();
      s.expert_id = j.at("expert_id").get<std::uint32_t>();
      s.entity_id = j.at("entity_id").get<EntityId>();
      s.kind = parse_sample_kind(j.at("kind").get<std::string>());
      s.split = parse_split(j.at("split").get<std::string>());
      s.diversity = j.at("diversity").get<int>();
      s.fact_ids = j.at("fact_ids").get<std::vector<std::size_t>>();
      s.corrupted = j.at("corrupted").get<std::vector<bool>>();
      if (j.contains("epoch")) s.epoch = j["epoch"].get<std::size_t>();
      s.fallback = j.value("fallback", false);
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("bad corpus record: ") + ex.what(), lineno, 1);
    } catch (const ValidationError& ex) {
      throw ParseError(ex.what(), lineno, 1);
    }
  }
  return out;
}

}  // namespace tlab
