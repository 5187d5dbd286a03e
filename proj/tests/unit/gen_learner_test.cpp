#include <doctest.h>

#include <algorithm>
#include <tuple>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tlab/clustering.hpp"
#include "tlab/corpus.hpp"
#include "tlab/error.hpp"
#include "tlab/eval.hpp"
#include "tlab/gen_learner.hpp"
#include "tlab/graph_gen.hpp"

using namespace tlab;
using tlab::testing::make_graph;

namespace {

KnowledgeGraph functional_graph(std::uint64_t seed) {
  auto gc = GraphGenConfig::desk(seed);
  gc.n_entities = 200;
  gc.target_edges = 400;
  gc.communities = 4;
  gc.functional = true;
  return generate_graph(gc);
}

// e0 -r-> e1 -r-> ... -r-> e50.
KnowledgeGraph chain() {
  std::vector<std::pair<std::string, std::string>> ents;
  std::vector<std::tuple<std::string, std::string, std::string>> facts;
  for (int i = 0; i <= 50; ++i) ents.push_back({"e" + std::to_string(i), "x"});
  for (int i = 0; i < 50; ++i) facts.push_back({"e" + std::to_string(i), "r", "e" + std::to_string(i + 1)});
  return make_graph(ents, {"r"}, facts);
}

Hypothesis sized(HypothesisKind kind, std::size_t entries, std::size_t kappa_comp = 0) {
  Hypothesis h;
  h.kind = kind;
  h.kappa_comp = kappa_comp;
  for (std::uint64_t i = 0; i < entries; ++i) {
    if (kind == HypothesisKind::kMemorizer) {
      h.two_hop_table[i] = 0;
    } else {
      h.one_hop_table[i] = 0;
    }
  }
  return h;
}

}  // namespace

TEST_SUITE("gen_learner") {
  TEST_CASE("functional check") {
    const auto ok = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r", "s"},
                               {{"a", "r", "b"}, {"a", "s", "c"}, {"b", "r", "c"}});
    CHECK(functional_check(ok).empty());
    const auto bad = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r"},
                                {{"a", "r", "b"}, {"a", "r", "c"}, {"b", "r", "c"}});
    const auto v = functional_check(bad);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == QueryKey{0, 0});
    const auto p = EdgePartition::from_assignment(1, {0, 0, 0});
    CHECK_THROWS_AS(build_training_set(bad, p), ValidationError);
  }

  TEST_CASE("description lengths") {
    std::vector<TwoHopExample> d;
    for (EntityId i = 0; i < 100; ++i) d.push_back({i, 0, 1, 1000 + i, 2000 + i, 0});
    CHECK(fit_memorizer(d).kappa() == 100);

    const auto g = chain();
    std::vector<TwoHopExample> two;
    for (EntityId i = 0; i + 2 <= 50; ++i) two.push_back({i, 0, 0, i + 1, i + 2, 0});
    const auto comp = fit_compositional(g, two, 5);
    CHECK(comp.one_hop_table.size() == 50);
    CHECK(comp.kappa() == 55);
    CHECK(fit_memorizer(two).kappa() == 49);
    CHECK(erm_select(two, g, 5).kind == HypothesisKind::kMemorizer);
  }

  TEST_CASE("selection by kappa") {
    const auto comp = sized(HypothesisKind::kCompositional, 50, 5);
    CHECK(erm_select(sized(HypothesisKind::kMemorizer, 100), comp).kind ==
          HypothesisKind::kCompositional);
    CHECK(erm_select(sized(HypothesisKind::kMemorizer, 10), comp).kind ==
          HypothesisKind::kMemorizer);
    CHECK(erm_select(sized(HypothesisKind::kMemorizer, 55), comp).kind ==
          HypothesisKind::kCompositional);
  }

  TEST_CASE("inconsistent memorizer input") {
    const std::vector<TwoHopExample> d = {{0, 0, 1, 5, 6, 0}, {0, 0, 1, 5, 7, 0}};
    CHECK_THROWS_AS(fit_memorizer(d), ValidationError);
  }

  TEST_CASE("sufficient condition against counting oracles") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto g = functional_graph(seed);
      const auto p = cluster_edges(g, 5, seed);
      const auto within = oracle::within_cluster_paths(g, p);
      CHECK(within_path_count(g, p) == within);
      CHECK(build_training_set(g, p).size() == oracle::within_cluster_distinct(g, p));
      for (std::size_t kappa : {0UL, 10UL, 100UL, 1000UL}) {
        const auto r = sufficient_condition(g, p, kappa);
        CHECK(r.lhs == g.num_facts() + kappa);
        CHECK(r.rhs == within);
        CHECK(r.holds == (r.lhs < r.rhs));
      }
    }
  }

  TEST_CASE("small condition example") {
    // One cluster: a star of 7 in-edges into b and 10 out-edges: 70 paths, 17 facts.
    std::vector<std::pair<std::string, std::string>> ents = {{"b", "x"}};
    std::vector<std::string> rels;
    std::vector<std::tuple<std::string, std::string, std::string>> facts;
    for (int i = 0; i < 7; ++i) {
      ents.push_back({"in" + std::to_string(i), "x"});
      rels.push_back("p" + std::to_string(i));
    }
    for (int j = 0; j < 10; ++j) {
      ents.push_back({"out" + std::to_string(j), "x"});
      rels.push_back("q" + std::to_string(j));
    }
    for (int i = 0; i < 7; ++i) facts.push_back({"in" + std::to_string(i), "p0", "b"});
    for (int j = 0; j < 10; ++j) facts.push_back({"b", "q" + std::to_string(j), "out" + std::to_string(j)});
    const auto g = make_graph(ents, rels, facts);
    const auto p = EdgePartition::from_assignment(1, std::vector<std::uint32_t>(g.num_facts(), 0));
    CHECK(sufficient_condition(g, p, 52).lhs == 69);
    CHECK(sufficient_condition(g, p, 52).holds);
    CHECK_FALSE(sufficient_condition(g, p, 53).holds);
    CHECK(erm_select(build_training_set(g, p), g, 52).kind == HypothesisKind::kCompositional);
    CHECK(erm_select(build_training_set(g, p), g, 54).kind == HypothesisKind::kMemorizer);
  }

  TEST_CASE("complete one-hop tables generalize, memorizers do not") {
    const auto g = functional_graph(7);
    const auto p = cluster_edges(g, 5, 7);
    const auto split = within_cluster_two_hops(g, p);
    REQUIRE_FALSE(split.across.empty());
    const auto d = build_training_set(g, p);
    const auto comp = fit_compositional(g, d, 0, OneHopScope::kFull);
    CHECK(evaluate_two_hop(comp, split.across) == 1.0);
    CHECK(evaluate_two_hop(comp, split.within) == 1.0);
    const auto mem = fit_memorizer(d);
    CHECK(evaluate_two_hop(mem, split.across) == 0.0);
    CHECK(evaluate_two_hop(mem, split.within) == 1.0);
  }

  TEST_CASE("partial one-hop tables answer exactly the reachable queries") {
    const auto g = functional_graph(9);
    const auto p = cluster_edges(g, 5, 9);
    const auto d = build_training_set(g, p);
    std::vector<TwoHopExample> half;
    for (std::size_t i = 0; i < d.size(); i += 2) half.push_back(d[i]);
    const auto h = fit_compositional(g, half, 0);
    std::vector<char> kept(g.num_facts(), 0);
    for (std::size_t i = 0; i < g.num_facts(); ++i) {
      const Fact& f = g.facts()[i];
      auto it = h.one_hop_table.find(QueryKey{f.head, f.relation}.packed());
      kept[i] = it != h.one_hop_table.end() && it->second == f.tail;
    }
    std::size_t answered = 0;
    for (const auto& q : oracle::all_two_hops(g)) {
      const auto y = h.apply(q.head, q.r1, q.r2);
      const bool hit = y && *y == q.tail;
      CHECK(hit == oracle::reachable(g, kept, q));
      answered += hit;
    }
    CHECK(answered >= half.size());
  }

  TEST_CASE("hypothesis json is stable") {
    const std::vector<TwoHopExample> d = {{3, 1, 2, 5, 6, 0}, {1, 0, 2, 4, 6, 0}};
    CHECK(hypothesis_to_json(fit_memorizer(d)) ==
          "{\"kind\":\"memorizer\",\"kappa\":2,\"kappa_comp\":0,\"table\":[[1,0,2,6],[3,1,2,6]]}\n");
  }
}
