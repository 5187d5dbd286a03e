#include "tlab/gen_learner.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "tlab/error.hpp"

namespace tlab {
namespace {

std::uint64_t pack3(EntityId head, RelationId r1, RelationId r2) {
  // 32 bits of head, 16 bits per relation.
  return (static_cast<std::uint64_t>(head) << 32) | (static_cast<std::uint64_t>(r1) << 16) | r2;
}

std::uint64_t pack2(EntityId e, RelationId r) { return QueryKey{e, r}.packed(); }

}  // namespace

std::vector<QueryKey> functional_check(const KnowledgeGraph& graph) {
  std::vector<QueryKey> out;
  const auto& facts = graph.facts();
  for (std::size_t i = 1; i < facts.size(); ++i) {
    const QueryKey k{facts[i].head, facts[i].relation};
    if (k == QueryKey{facts[i - 1].head, facts[i - 1].relation} && (out.empty() || out.back() != k)) {
      out.push_back(k);
    }
  }
  return out;
}

TwoHopExample to_example(const TwoHopFact& t, std::uint32_t cluster) {
  return {t.head, t.r1, t.r2, t.bridge, t.tail, cluster};
}

std::vector<TwoHopExample> build_training_set(const KnowledgeGraph& graph,
                                              const EdgePartition& partition) {
  const auto violations = functional_check(graph);
  if (!violations.empty()) {
    throw ValidationError("graph is not functional: prefix (" +
                          std::to_string(violations[0].head) + ", " +
                          std::to_string(violations[0].relation) + ") has several tails");
  }
  if (graph.num_relations() > 0xffff) throw ValidationError("too many relations");
  const auto split = within_cluster_two_hops(graph, partition);
  std::vector<TwoHopExample> out;
  out.reserve(split.within.size());
  for (const auto& t : split.within) {
    const auto first = graph.fact_index({t.head, t.r1, t.bridge});
    out.push_back(to_example(t, partition.assignment[*first]));
  }
  // In a functional graph every input has one bridge, so these are distinct.
  return out;
}

std::size_t within_path_count(const KnowledgeGraph& graph, const EdgePartition& partition) {
  partition.validate(graph);
  std::size_t total = 0;
  std::vector<std::size_t> in_count(partition.k, 0);
  for (EntityId v = 0; v < graph.num_entities(); ++v) {
    const auto in = graph.in_facts(v);
    const auto out = graph.out_facts(v);
    if (in.empty() || out.empty()) continue;
    std::fill(in_count.begin(), in_count.end(), 0);
    for (auto i : in) ++in_count[partition.assignment[i]];
    for (auto o : out) total += in_count[partition.assignment[o]];
  }
  return total;
}

std::string to_string(HypothesisKind k) {
  return k == HypothesisKind::kMemorizer ? "memorizer" : "compositional";
}

std::size_t Hypothesis::kappa() const {
  if (kind == HypothesisKind::kMemorizer) return two_hop_table.size();
  return one_hop_table.size() + kappa_comp;
}

std::optional<EntityId> Hypothesis::apply(EntityId head, RelationId r1, RelationId r2) const {
  if (kind == HypothesisKind::kMemorizer) {
    auto it = two_hop_table.find(pack3(head, r1, r2));
    if (it == two_hop_table.end()) return std::nullopt;
    return it->second;
  }
  auto a = one_hop_table.find(pack2(head, r1));
  if (a == one_hop_table.end()) return std::nullopt;
  auto b = one_hop_table.find(pack2(a->second, r2));
  if (b == one_hop_table.end()) return std::nullopt;
  return b->second;
}

Hypothesis fit_memorizer(std::span<const TwoHopExample> examples) {
  Hypothesis h;
  h.kind = HypothesisKind::kMemorizer;
  for (const auto& ex : examples) {
    auto [it, inserted] = h.two_hop_table.emplace(pack3(ex.head, ex.r1, ex.r2), ex.label);
    if (!inserted && it->second != ex.label) {
      throw ValidationError("inconsistent labels for input (" + std::to_string(ex.head) + ", " +
                            std::to_string(ex.r1) + ", " + std::to_string(ex.r2) + ")");
    }
  }
  return h;
}

Hypothesis fit_compositional(const KnowledgeGraph& graph, std::span<const TwoHopExample> examples,
                             std::size_t kappa_comp, OneHopScope scope) {
  Hypothesis h;
  h.kind = HypothesisKind::kCompositional;
  h.kappa_comp = kappa_comp;
  auto store = [&](EntityId e, RelationId r, EntityId t) {
    auto [it, inserted] = h.one_hop_table.emplace(pack2(e, r), t);
    if (!inserted && it->second != t) {
      throw ValidationError("inconsistent one-hop facts for prefix (" + std::to_string(e) + ", " +
                            std::to_string(r) + ")");
    }
  };
  if (scope == OneHopScope::kFull) {
    for (const Fact& f : graph.facts()) store(f.head, f.relation, f.tail);
  }
  for (const auto& ex : examples) {
    if (!graph.contains({ex.head, ex.r1, ex.bridge}) ||
        !graph.contains({ex.bridge, ex.r2, ex.label})) {
      throw ValidationError("example does not derive from the graph");
    }
    store(ex.head, ex.r1, ex.bridge);
    store(ex.bridge, ex.r2, ex.label);
  }
  return h;
}

const Hypothesis& erm_select(const Hypothesis& memorizer, const Hypothesis& compositional) {
  return compositional.kappa() <= memorizer.kappa() ? compositional : memorizer;
}

Hypothesis erm_select(std::span<const TwoHopExample> examples, const KnowledgeGraph& graph,
                      std::size_t kappa_comp, OneHopScope scope) {
  Hypothesis mem = fit_memorizer(examples);
  Hypothesis comp = fit_compositional(graph, examples, kappa_comp, scope);
  return comp.kappa() <= mem.kappa() ? comp : mem;
}

ConditionReport sufficient_condition(const KnowledgeGraph& graph, const EdgePartition& partition,
                                     std::size_t kappa_comp) {
  ConditionReport r;
  r.lhs = graph.num_facts() + kappa_comp;
  r.rhs = within_path_count(graph, partition);
  r.distinct_d = within_cluster_two_hops(graph, partition).within.size();
  r.holds = r.lhs < r.rhs;
  r.holds_distinct = r.lhs < r.distinct_d;
  return r;
}

double evaluate_two_hop(const Hypothesis& h, std::span<const TwoHopFact> queries) {
  if (queries.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& q : queries) {
    const auto y = h.apply(q.head, q.r1, q.r2);
    if (y && *y == q.tail) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

std::string hypothesis_to_json(const Hypothesis& h) {
  nlohmann::ordered_json doc;
  doc["kind"] = to_string(h.kind);
  doc["kappa"] = h.kappa();
  doc["kappa_comp"] = h.kind == HypothesisKind::kCompositional ? h.kappa_comp : 0;
  auto& table = doc["table"] = nlohmann::ordered_json::array();
  if (h.kind == HypothesisKind::kMemorizer) {
    std::vector<std::pair<std::uint64_t, EntityId>> rows(h.two_hop_table.begin(),
                                                         h.two_hop_table.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [k, v] : rows) {
      table.push_back({static_cast<EntityId>(k >> 32), (k >> 16) & 0xffff, k & 0xffff, v});
    }
  } else {
    std::vector<std::pair<std::uint64_t, EntityId>> rows(h.one_hop_table.begin(),
                                                         h.one_hop_table.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [k, v] : rows) {
      const auto q = QueryKey::unpack(k);
      table.push_back({q.head, q.relation, v});
    }
  }
  return doc.dump() + "\n";
}

std::string condition_csv_header() {
  return "lhs,rhs,holds,kind_selected,acc_within_val,acc_across\n";
}

std::string condition_csv_row(const GeneralizationOutcome& o) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%s,%.10g,%.10g\n", o.condition.lhs, o.condition.rhs,
                o.condition.holds ? "true" : "false", to_string(o.selected).c_str(),
                o.acc_within_val, o.acc_across);
  return buf;
}

}  // namespace tlab
