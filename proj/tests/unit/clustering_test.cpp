#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "tlab/clustering.hpp"
#include "tlab/graph_gen.hpp"
#include "tlab/rng.hpp"

using namespace tlab;
using tlab::testing::make_graph;
using tlab::testing::random_graph;

TEST_SUITE("clustering") {
  TEST_CASE("k = 1 puts every fact in cluster 0") {
    const auto g = random_graph(30, 2, 60, 1);
    const auto p = cluster_edges(g, 1, 0);
    CHECK(p.k == 1);
    for (auto c : p.assignment) CHECK(c == 0);
  }

  TEST_CASE("two components split into two clusters") {
    const auto g = make_graph(
        {{"a", "x"}, {"b", "x"}, {"c", "x"}, {"d", "x"}, {"e", "x"}, {"f", "x"}}, {"r"},
        {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "a"}, {"d", "r", "e"}, {"e", "r", "f"},
         {"f", "r", "d"}});
    const auto p = cluster_edges(g, 2, 3);
    std::set<std::uint32_t> first;
    std::set<std::uint32_t> second;
    for (std::size_t i = 0; i < g.num_facts(); ++i) {
      (g.facts()[i].head < 3 ? first : second).insert(p.assignment[i]);
    }
    CHECK(first.size() == 1);
    CHECK(second.size() == 1);
    CHECK(*first.begin() != *second.begin());
  }

  TEST_CASE("desk partition beats random partitions on modularity") {
    const auto g = generate_graph(GraphGenConfig::desk(2));
    const auto p = cluster_edges(g, 50, 7);
    p.validate(g);
    const double q = modularity(g, node_labels(g, p));
    Rng rng(99);
    double best_random = -1.0;
    for (int t = 0; t < 100; ++t) {
      std::vector<std::uint32_t> labels(g.num_entities());
      for (auto& l : labels) l = static_cast<std::uint32_t>(rng.index(50));
      best_random = std::max(best_random, modularity(g, labels));
    }
    CHECK(q >= best_random);
  }

  TEST_CASE("dense and iterative solvers agree on the partition quality") {
    const auto g = random_graph(120, 2, 300, 6);
    ClusterOptions iter;
    iter.force_iterative = true;
    const auto a = cluster_edges(g, 5, 2);
    const auto b = cluster_edges(g, 5, 2, iter);
    a.validate(g);
    b.validate(g);
    CHECK(std::abs(modularity(g, node_labels(g, a)) - modularity(g, node_labels(g, b))) < 0.05);
  }

  TEST_CASE("within / across classification") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r1", "r2"},
                              {{"a", "r1", "b"}, {"b", "r2", "c"}});
    const auto same = EdgePartition::from_assignment(4, {3, 3});
    CHECK(within_cluster_two_hops(g, same).within.size() == 1);
    const auto split = EdgePartition::from_assignment(3, {1, 2});
    const auto s = within_cluster_two_hops(g, split);
    CHECK(s.within.empty());
    CHECK(s.across.size() == 1);
  }

  TEST_CASE("within and across cover every two-hop fact") {
    const auto g = random_graph(40, 3, 120, 12);
    const auto p = cluster_edges(g, 4, 1);
    const auto s = within_cluster_two_hops(g, p);
    CHECK(s.within.size() + s.across.size() == enumerate_two_hop(g).size());
  }

  TEST_CASE("partition JSON round trip") {
    const auto p = EdgePartition::from_assignment(3, {0, 2, 2, 1});
    CHECK(partition_from_json(partition_to_json(p)) == p);
  }

  TEST_CASE("clustering is deterministic") {
    const auto g = random_graph(60, 2, 150, 2);
    CHECK(cluster_edges(g, 6, 5) == cluster_edges(g, 6, 5));
  }
}
