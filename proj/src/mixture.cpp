#include "tlab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>

#include "json.hpp"
#include "tlab/error.hpp"
#include "tlab/text.hpp"

namespace tlab {

ConditionalTable ConditionalTable::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.tail < b.tail;
  });
  ConditionalTable t;
  std::size_t i = 0;
  while (i < entries.size()) {
    const std::uint64_t key = entries[i].key;
    const std::size_t start = t.probs_.size();
    double total = 0.0;
    for (; i < entries.size() && entries[i].key == key; ++i) {
      if (entries[i].weight <= 0.0) continue;
      if (t.probs_.size() > start && t.probs_.back().tail == entries[i].tail) {
        t.probs_.back().p += entries[i].weight;
      } else {
        t.probs_.push_back({entries[i].tail, entries[i].weight});
      }
      total += entries[i].weight;
    }
    if (t.probs_.size() == start) continue;
    for (std::size_t j = start; j < t.probs_.size(); ++j) t.probs_[j].p /= total;
    t.keys_.push_back(key);
    t.mass_.push_back(total);
    t.offsets_.push_back(start);
  }
  t.offsets_.push_back(t.probs_.size());
  return t;
}

std::span<const TailProb> ConditionalTable::at(std::size_t i) const {
  return std::span<const TailProb>(probs_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::optional<std::size_t> ConditionalTable::find(QueryKey key) const {
  const std::uint64_t k = key.packed();
  auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
  if (it == keys_.end() || *it != k) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

std::span<const TailProb> ConditionalTable::conditional(QueryKey key) const {
  auto i = find(key);
  return i ? at(*i) : std::span<const TailProb>();
}

double ConditionalTable::mass(QueryKey key) const {
  auto i = find(key);
  return i ? mass_[*i] : 0.0;
}

RewardSpec RewardSpec::uniform_over_facts(const KnowledgeGraph& graph) {
  RewardSpec spec;
  const double unit = 1.0 / static_cast<double>(graph.num_facts());
  for (const Fact& f : graph.facts()) {
    const QueryKey key{f.head, f.relation};
    // Facts are canonical-sorted, so equal prefixes are adjacent.
    if (!spec.queries.empty() && spec.queries.back().first == key) {
      spec.queries.back().second += unit;
    } else {
      spec.queries.emplace_back(key, unit);
    }
  }
  return spec;
}

void RewardSpec::validate() const {
  double total = 0.0;
  for (const auto& [key, p] : queries) {
    if (!(p >= 0.0)) throw ValidationError("negative test probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("test distribution sums to " + std::to_string(total));
  }
}

std::string to_string(MixtureKind k) { return k == MixtureKind::kExact ? "exact" : "empirical"; }

double MixtureModel::posterior(std::size_t expert, QueryKey key) const {
  double den = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) den += weights[j] * components[j].mass(key);
  if (den <= 0.0) {
    return weights[expert] / std::accumulate(weights.begin(), weights.end(), 0.0);
  }
  return weights[expert] * components[expert].mass(key) / den;
}

double MixtureModel::normalization_error() const {
  double worst = 0.0;
  auto check = [&](const ConditionalTable& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      double s = 0.0;
      for (const auto& tp : t.at(i)) {
        if (tp.p < 0.0) worst = std::max(worst, -tp.p);
        s += tp.p;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
  };
  check(table);
  for (const auto& c : components) check(c);
  return worst;
}

ConditionalTable expert_component(const ExpertProfile& expert, double alpha) {
  const PersonalGraph pg = PersonalGraph::build(expert);
  double denom = 0.0;
  for (const auto& inc : pg.incident) {
    double none = 1.0;
    for (std::uint32_t i : inc) none *= 1.0 - emission_weight(expert, expert.facts[i], alpha);
    denom += 1.0 - none;
  }
  if (denom <= 0.0) {
    throw ValidationError("expert " + std::to_string(expert.expert_id) + " emits no facts");
  }
  std::vector<ConditionalTable::Entry> entries;
  entries.reserve(expert.facts.size());
  for (const auto& pf : expert.facts) {
    const double rate = 2.0 * emission_weight(expert, pf, alpha) / denom;
    entries.push_back({QueryKey{pf.fact.head, pf.fact.relation}.packed(), pf.fact.tail, rate});
  }
  return ConditionalTable::from_entries(std::move(entries));
}

std::vector<double> expert_weights(const std::vector<ExpertProfile>& experts,
                                   const CorpusConfig& config, ExpertPrior prior) {
  if (prior == ExpertPrior::kUniform) {
    return std::vector<double>(experts.size(), 1.0 / static_cast<double>(experts.size()));
  }
  const auto quotas = corpus_quotas(experts, config);
  std::vector<double> u(quotas.size());
  for (std::size_t i = 0; i < quotas.size(); ++i) {
    u[i] = static_cast<double>(quotas[i]) / static_cast<double>(config.total_samples);
  }
  return u;
}

MixtureModel exact_mixture(const std::vector<ExpertProfile>& experts, double alpha,
                           const std::vector<double>& weights) {
  if (experts.empty()) throw ValidationError("no experts");
  if (weights.size() != experts.size()) {
    throw ValidationError("expert weight count differs from expert count");
  }
  MixtureModel model;
  model.kind = MixtureKind::kExact;
  model.weights = weights;
  model.components.reserve(experts.size());
  std::vector<ConditionalTable::Entry> entries;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    model.components.push_back(expert_component(experts[i], alpha));
    const ConditionalTable& c = model.components.back();
    for (std::size_t k = 0; k < c.size(); ++k) {
      const std::uint64_t key = c.key(k).packed();
      for (const auto& tp : c.at(k)) {
        entries.push_back({key, tp.tail, weights[i] * c.mass(k) * tp.p});
      }
    }
  }
  model.table = ConditionalTable::from_entries(std::move(entries));
  return model;
}

MixtureModel exact_mixture(const std::vector<ExpertProfile>& experts, const CorpusConfig& config,
                           ExpertPrior prior) {
  config.validate();
  return exact_mixture(experts, config.alpha, expert_weights(experts, config, prior));
}

namespace {

void add_sample(const TemplateParser& parser, const Sample& s,
                std::vector<ConditionalTable::Entry>& entries) {
  if (s.kind != SampleKind::kOneHopParagraph) return;
  for (const Fact& f : parser.parse_paragraph(s.text)) {
    entries.push_back({QueryKey{f.head, f.relation}.packed(), f.tail, 1.0});
  }
}

MixtureModel empirical_from(std::vector<ConditionalTable::Entry> entries) {
  MixtureModel model;
  model.kind = MixtureKind::kEmpirical;
  model.table = ConditionalTable::from_entries(std::move(entries));
  return model;
}

}  // namespace

MixtureModel fit_empirical(const KnowledgeGraph& graph, std::span<const Sample> samples) {
  const TemplateParser parser(graph);
  std::vector<ConditionalTable::Entry> entries;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      add_sample(parser, samples[i], entries);
    } catch (const ValidationError& e) {
      throw ValidationError("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return empirical_from(std::move(entries));
}

MixtureModel fit_empirical(const KnowledgeGraph& graph, std::istream& jsonl) {
  const TemplateParser parser(graph);
  std::vector<ConditionalTable::Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(jsonl, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string() ||
        !j.contains("kind") || !j["kind"].is_string()) {
      throw ParseError("malformed corpus line", lineno, 1);
    }
    try {
      Sample s;
      s.kind = parse_sample_kind(j["kind"].get<std::string>());
      s.text = j["text"].get<std::string>();
      add_sample(parser, s, entries);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno, 1);
    }
  }
  return empirical_from(std::move(entries));
}

std::optional<EntityId> argmax_tail(std::span<const TailProb> dist) {
  if (dist.empty()) return std::nullopt;
  // Tails are ascending, so the first maximum has the lowest id.
  const TailProb* best = &dist[0];
  for (const auto& tp : dist) {
    if (tp.p > best->p) best = &tp;
  }
  return best->tail;
}

std::vector<TailProb> tempered(std::span<const TailProb> dist, double temperature) {
  if (temperature < 0.0) throw ValidationError("temperature must be non-negative");
  std::vector<TailProb> out;
  if (dist.empty()) return out;
  if (temperature == 0.0) {
    out.push_back({*argmax_tail(dist), 1.0});
    return out;
  }
  double pmax = 0.0;
  for (const auto& tp : dist) pmax = std::max(pmax, tp.p);
  double total = 0.0;
  for (const auto& tp : dist) {
    if (tp.p <= 0.0) continue;
    const double w = std::exp((std::log(tp.p) - std::log(pmax)) / temperature);
    out.push_back({tp.tail, w});
    total += w;
  }
  for (auto& tp : out) tp.p /= total;
  return out;
}

std::optional<EntityId> predict(const MixtureModel& model, QueryKey key, double temperature,
                                Rng& rng) {
  if (temperature < 0.0) throw ValidationError("temperature must be non-negative");
  const auto dist = model.conditional(key);
  if (dist.empty()) return std::nullopt;
  if (temperature == 0.0) return argmax_tail(dist);
  const auto t = tempered(dist, temperature);
  double u = rng.uniform();
  for (const auto& tp : t) {
    if (u < tp.p) return tp.tail;
    u -= tp.p;
  }
  return t.back().tail;
}

namespace {

bool is_answer(const KnowledgeGraph& graph, QueryKey key, EntityId tail) {
  const auto ans = graph.answers(key);
  return std::binary_search(ans.begin(), ans.end(), tail);
}

}  // namespace

double query_accuracy(const MixtureModel& model, const KnowledgeGraph& graph, double temperature,
                      std::uint64_t seed) {
  if (temperature < 0.0) throw ValidationError("temperature must be non-negative");
  if (graph.num_facts() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < graph.num_facts(); ++i) {
    const Fact& f = graph.facts()[i];
    const QueryKey key{f.head, f.relation};
    Rng rng(derive_seed(seed, "query", i));
    const auto y = predict(model, key, temperature, rng);
    if (y && is_answer(graph, key, *y)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(graph.num_facts());
}

double query_reward(std::span<const TailProb> dist, const KnowledgeGraph& graph, QueryKey key) {
  double r = 0.0;
  for (const auto& tp : dist) {
    if (is_answer(graph, key, tp.tail)) r += tp.p;
  }
  return r;
}

double expected_reward(const MixtureModel& model, const KnowledgeGraph& graph,
                       const RewardSpec& spec, double temperature) {
  double total = 0.0;
  for (const auto& [key, p] : spec.queries) {
    const auto dist = model.conditional(key);
    if (dist.empty()) continue;
    total += p * query_reward(tempered(dist, temperature), graph, key);
  }
  return total;
}

double component_reward(const KnowledgeGraph& graph, const ConditionalTable& component,
                        const RewardSpec& spec) {
  double total = 0.0;
  for (const auto& [key, p] : spec.queries) {
    total += p * query_reward(component.conditional(key), graph, key);
  }
  return total;
}

double expert_reward(const KnowledgeGraph& graph, const ExpertProfile& expert,
                     const RewardSpec& spec, double alpha) {
  return component_reward(graph, expert_component(expert, alpha), spec);
}

double two_expert_statistic(std::span<const TwoExpertTerm> terms) {
  double total = 0.0;
  for (const auto& t : terms) {
    if (std::abs(t.g_a + t.g_b - 1.0) > 1e-9 || t.g_a < 0.0 || t.g_b < 0.0) {
      throw ValidationError("posterior not normalized: g(a|x) + g(b|x) = " +
                            std::to_string(t.g_a + t.g_b));
    }
    total += t.p * (t.r_a - t.r_b) * (t.g_a - t.g_b);
  }
  return total;
}

std::vector<TwoExpertTerm> two_expert_terms(const KnowledgeGraph& graph, const MixtureModel& model,
                                            const RewardSpec& spec) {
  if (model.components.size() != 2) {
    throw ValidationError("two-expert statistic needs an exact two-expert model");
  }
  std::vector<TwoExpertTerm> terms;
  terms.reserve(spec.queries.size());
  for (const auto& [key, p] : spec.queries) {
    TwoExpertTerm t;
    t.p = p;
    t.r_a = query_reward(model.components[0].conditional(key), graph, key);
    t.r_b = query_reward(model.components[1].conditional(key), graph, key);
    t.g_a = model.posterior(0, key);
    t.g_b = model.posterior(1, key);
    terms.push_back(t);
  }
  return terms;
}

TranscendenceReport transcendence_report(const KnowledgeGraph& graph, const MixtureModel& model,
                                         const RewardSpec& spec, double temperature) {
  if (model.kind != MixtureKind::kExact) {
    throw ValidationError("transcendence report needs an exact mixture");
  }
  TranscendenceReport r;
  r.model_reward = expected_reward(model, graph, spec, temperature);
  for (const auto& c : model.components) {
    r.expert_rewards.push_back(component_reward(graph, c, spec));
  }
  r.max_expert_reward = *std::max_element(r.expert_rewards.begin(), r.expert_rewards.end());
  r.transcends = r.model_reward > r.max_expert_reward;
  if (model.components.size() == 2) {
    r.statistic = two_expert_statistic(two_expert_terms(graph, model, spec));
  }
  return r;
}

std::string model_to_json(const MixtureModel& model) {
  nlohmann::ordered_json doc;
  doc["kind"] = to_string(model.kind);
  auto& prefixes = doc["prefixes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < model.table.size(); ++i) {
    nlohmann::ordered_json p;
    p["head"] = model.table.key(i).head;
    p["relation"] = model.table.key(i).relation;
    auto& tails = p["tails"] = nlohmann::ordered_json::array();
    for (const auto& tp : model.table.at(i)) tails.push_back({tp.tail, tp.p});
    prefixes.push_back(std::move(p));
  }
  return doc.dump() + "\n";
}

}  // namespace tlab
