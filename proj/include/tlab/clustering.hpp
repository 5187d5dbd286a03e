#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlab/kg.hpp"

namespace tlab {

// Assignment of every fact (by canonical index) to one of k clusters.
struct EdgePartition {
  std::size_t k = 0;
  std::vector<std::uint32_t> assignment;
  std::vector<std::size_t> sizes;

  // Rebuilds sizes from assignment.
  static EdgePartition from_assignment(std::size_t k, std::vector<std::uint32_t> assignment);

  std::size_t non_empty() const;
  // Throws ValidationError if the partition does not fit the graph.
  void validate(const KnowledgeGraph& graph) const;
  bool operator==(const EdgePartition&) const = default;
};

struct ClusterOptions {
  std::size_t restarts = 10;
  std::size_t dense_limit = 2000;  // node count above which Lanczos is used
  bool force_iterative = false;
  double tolerance = 1e-8;
  std::size_t max_iterations = 5000;
  unsigned workers = 1;
};

// Spectral clustering of the non-isolated nodes on the symmetrized
// adjacency; each fact inherits its head's cluster. Cluster ids are
// renumbered by first appearance in canonical fact order.
EdgePartition cluster_edges(const KnowledgeGraph& graph, std::size_t k, std::uint64_t seed,
                            const ClusterOptions& options = {});

struct TwoHopSplit {
  std::vector<TwoHopFact> within;
  std::vector<TwoHopFact> across;
};

// Within: both hops in one cluster. Across: the remaining two-hop facts.
TwoHopSplit within_cluster_two_hops(const KnowledgeGraph& graph, const EdgePartition& partition);

// Newman modularity of a node labelling on the symmetrized multigraph.
double modularity(const KnowledgeGraph& graph, const std::vector<std::uint32_t>& node_labels);

// Node labels implied by an edge partition: a node takes the cluster of its
// first outgoing fact, else of its first incoming fact.
std::vector<std::uint32_t> node_labels(const KnowledgeGraph& graph,
                                       const EdgePartition& partition);

// {"k": k, "assignment": [cluster per canonical fact index]}
std::string partition_to_json(const EdgePartition& partition);
EdgePartition partition_from_json(const std::string& text);

}  // namespace tlab
