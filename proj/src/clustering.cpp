#include "tlab/clustering.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "tlab/error.hpp"
#include "tlab/rng.hpp"
#include "tlab/spectral.hpp"

namespace tlab {

EdgePartition EdgePartition::from_assignment(std::size_t k, std::vector<std::uint32_t> assignment) {
  EdgePartition p;
  p.k = k;
  p.sizes.assign(k, 0);
  for (auto c : assignment) {
    if (c >= k) throw ValidationError("cluster id " + std::to_string(c) + " >= k");
    ++p.sizes[c];
  }
  p.assignment = std::move(assignment);
  return p;
}

std::size_t EdgePartition::non_empty() const {
  return static_cast<std::size_t>(
      std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }));
}

void EdgePartition::validate(const KnowledgeGraph& graph) const {
  if (assignment.size() != graph.num_facts()) {
    throw ValidationError("partition covers " + std::to_string(assignment.size()) +
                          " facts but graph has " + std::to_string(graph.num_facts()));
  }
  if (sizes.size() != k) throw ValidationError("partition sizes length differs from k");
  std::vector<std::size_t> recount(k, 0);
  for (auto c : assignment) {
    if (c >= k) throw ValidationError("cluster id " + std::to_string(c) + " >= k");
    ++recount[c];
  }
  if (recount != sizes) throw ValidationError("partition sizes do not match assignment");
}

EdgePartition cluster_edges(const KnowledgeGraph& graph, std::size_t k, std::uint64_t seed,
                            const ClusterOptions& options) {
  const std::size_t m = graph.num_facts();
  if (k < 1 || k > m) {
    throw ValidationError("cluster count k=" + std::to_string(k) + " outside [1, |E|=" +
                          std::to_string(m) + "]");
  }
  if (k == 1) return EdgePartition::from_assignment(1, std::vector<std::uint32_t>(m, 0));

  std::vector<EntityId> nodes;
  for (EntityId v = 0; v < graph.num_entities(); ++v) {
    if (!graph.out_facts(v).empty() || !graph.in_facts(v).empty()) nodes.push_back(v);
  }
  const std::size_t node_k = std::min(k, nodes.size());

  const auto lap = spectral::laplacian(graph, nodes);
  spectral::EigenResult eig;
  if (nodes.size() <= options.dense_limit && !options.force_iterative) {
    eig = spectral::smallest_eigenpairs_dense(lap.to_dense(), node_k);
  } else {
    spectral::IterativeOptions it;
    it.tolerance = options.tolerance;
    it.max_iterations = options.max_iterations;
    it.seed = derive_seed(seed, "eigen");
    eig = spectral::smallest_eigenpairs_lanczos(lap, node_k, it);
  }

  spectral::KMeansOptions km;
  km.k = node_k;
  km.restarts = options.restarts;
  km.seed = derive_seed(seed, "kmeans");
  km.workers = options.workers;
  const auto result = spectral::kmeans(eig.vectors, km);

  std::vector<std::int64_t> node_cluster(graph.num_entities(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) node_cluster[nodes[i]] = result.labels[i];

  std::vector<std::int64_t> renumber(node_k, -1);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> assignment(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto c = node_cluster[graph.facts()[i].head];
    if (renumber[c] < 0) renumber[c] = next++;
    assignment[i] = static_cast<std::uint32_t>(renumber[c]);
  }
  return EdgePartition::from_assignment(k, std::move(assignment));
}

TwoHopSplit within_cluster_two_hops(const KnowledgeGraph& graph,
                                    const EdgePartition& partition) {
  partition.validate(graph);
  std::vector<TwoHopFact> within;
  std::vector<TwoHopFact> across;
  for (const TwoHopFact& t : enumerate_two_hop(graph)) {
    const auto first = graph.fact_index({t.head, t.r1, t.bridge});
    const auto second = graph.fact_index({t.bridge, t.r2, t.tail});
    if (partition.assignment[*first] == partition.assignment[*second]) {
      within.push_back(t);
    } else {
      across.push_back(t);
    }
  }
  return {std::move(within), std::move(across)};
}

double modularity(const KnowledgeGraph& graph, const std::vector<std::uint32_t>& node_labels) {
  const double m = static_cast<double>(graph.num_facts());
  if (m == 0) return 0.0;
  std::map<std::uint32_t, double> internal;
  std::map<std::uint32_t, double> degree;
  for (const Fact& f : graph.facts()) {
    const auto a = node_labels.at(f.head);
    const auto b = node_labels.at(f.tail);
    if (a == b) internal[a] += 1.0;
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  double q = 0.0;
  for (const auto& [label, d] : degree) {
    q += internal[label] / m - (d / (2.0 * m)) * (d / (2.0 * m));
  }
  return q;
}

std::vector<std::uint32_t> node_labels(const KnowledgeGraph& graph,
                                       const EdgePartition& partition) {
  std::vector<std::uint32_t> labels(graph.num_entities(), 0);
  for (EntityId v = 0; v < graph.num_entities(); ++v) {
    if (!graph.out_facts(v).empty()) {
      labels[v] = partition.assignment[graph.out_facts(v).front()];
    } else if (!graph.in_facts(v).empty()) {
      labels[v] = partition.assignment[graph.in_facts(v).front()];
    }
  }
  return labels;
}

std::string partition_to_json(const EdgePartition& partition) {
  nlohmann::ordered_json doc;
  doc["k"] = partition.k;
  doc["assignment"] = partition.assignment;
  return doc.dump() + "\n";
}

EdgePartition partition_from_json(const std::string& text) {
  auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("k") ||
      !doc["k"].is_number_unsigned() || !doc.contains("assignment") ||
      !doc["assignment"].is_array()) {
    throw ValidationError("malformed partition JSON");
  }
  std::vector<std::uint32_t> assignment;
  for (const auto& c : doc["assignment"]) {
    if (!c.is_number_unsigned()) throw ValidationError("partition assignment must be unsigned");
    assignment.push_back(c.get<std::uint32_t>());
  }
  return EdgePartition::from_assignment(doc["k"].get<std::size_t>(), std::move(assignment));
}

}  // namespace tlab
