#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tlab/clustering.hpp"
#include "tlab/error.hpp"
#include "tlab/experts.hpp"
#include "tlab/gen_learner.hpp"
#include "tlab/graph_gen.hpp"

using namespace tlab;
using tlab::testing::make_graph;
using tlab::testing::random_graph;

TEST_SUITE("experts") {
  TEST_CASE("single candidate substitute") {
    const auto g = make_graph({{"h", "p"}, {"x", "p"}, {"t", "q"}}, {"r"}, {{"h", "r", "t"}});
    CHECK(corrupt_fact(g, g.facts()[0], 1, CorruptSide::kHead) == Fact{1, 0, 2});
    CHECK_THROWS_AS(corrupt_fact(g, g.facts()[0], 1, CorruptSide::kTail), ValidationError);
    // kAny falls back to the side that has a candidate.
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(corrupt_fact(g, g.facts()[0], s).head == 1);
  }

  TEST_CASE("relation preserved, endpoints excluded") {
    const auto g = random_graph(12, 3, 30, 2);
    for (std::uint64_t s = 0; s < 10000; ++s) {
      const Fact& f = g.facts()[s % g.num_facts()];
      const Fact c = corrupt_fact(g, f, s);
      CHECK(c.relation == f.relation);
      CHECK(c != f);
      CHECK(c.head != c.tail);
      const bool head_changed = c.head != f.head;
      CHECK(head_changed != (c.tail != f.tail));
      const EntityId sub = head_changed ? c.head : c.tail;
      CHECK(sub != f.head);
      CHECK(sub != f.tail);
    }
  }

  TEST_CASE("substitutes are uniform over the type pool") {
    const auto g = random_graph(12, 1, 20, 3);
    const Fact f = g.facts()[0];
    std::map<EntityId, double> counts;
    const int draws = 100000;
    for (int s = 0; s < draws; ++s) {
      counts[corrupt_fact(g, f, static_cast<std::uint64_t>(s), CorruptSide::kTail).tail] += 1;
    }
    CHECK(counts.size() == 10);  // 12 entities minus both endpoints
    const double expected = draws / 10.0;
    double chi2 = 0.0;
    for (const auto& [e, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(chi2 < 27.9);  // 9 dof, 99.9th percentile
  }

  TEST_CASE("denoising coverage extremes and binomial count") {
    const auto g = generate_graph(GraphGenConfig::desk(1));
    const auto perfect = build_denoising_experts(g, 2, 1.0, 1);
    for (const auto& e : perfect) {
      CHECK(e.corrupted_count() == 0);
      std::vector<Fact> fs;
      for (const auto& pf : e.facts) fs.push_back(pf.fact);
      CHECK(fs == g.facts());
    }
    const auto none = build_denoising_experts(g, 2, 0.0, 1);
    for (const auto& e : none) CHECK(e.corrupted_count() == e.facts.size());

    const auto fifth = build_denoising_experts(g, 5, 0.2, 1);
    const double n = static_cast<double>(g.num_facts());
    const double sigma = std::sqrt(n * 0.2 * 0.8);
    for (const auto& e : fifth) {
      const double correct = static_cast<double>(e.facts.size() - e.corrupted_count());
      CHECK(std::abs(correct - 0.2 * n) <= 3 * sigma);
    }
  }

  TEST_CASE("expert streams do not depend on n_e") {
    const auto g = random_graph(30, 2, 80, 4);
    const auto few = build_denoising_experts(g, 2, 0.5, 9);
    const auto many = build_denoising_experts(g, 5, 0.5, 9);
    CHECK(few[0] == many[0]);
    CHECK(few[1] == many[1]);
  }

  TEST_CASE("greedy coverage arithmetic") {
    const std::vector<std::size_t> sizes = {60, 40};
    // Either order fills one cluster first; the budget is 50 facts.
    bool saw_expected = false;
    for (std::uint64_t s = 0; s < 16; ++s) {
      const auto v = greedy_coverage_vector(sizes, 0.5, s);
      CHECK(v[0] * 60 + v[1] * 40 == doctest::Approx(50.0));
      if (std::abs(v[0] - 50.0 / 60.0) < 1e-12 && v[1] == 0.0) saw_expected = true;
    }
    CHECK(saw_expected);
    for (double s : greedy_coverage_vector(sizes, 1.0, 3)) CHECK(s == 1.0);
  }

  TEST_CASE("selection budgets within one fact") {
    const auto g = generate_graph(GraphGenConfig::desk(1));
    const auto p = cluster_edges(g, 50, 1);
    const auto experts = build_selection_experts(g, p, 100, 0.1, 5);
    const double budget = 0.1 * static_cast<double>(g.num_facts());
    for (const auto& e : experts) {
      double covered = 0.0;
      for (std::size_t j = 0; j < p.k; ++j) covered += e.coverage[j] * static_cast<double>(p.sizes[j]);
      CHECK(std::abs(covered - budget) <= 1.0);
    }
  }

  TEST_CASE("shared misconceptions agree across experts") {
    const auto g = random_graph(30, 2, 80, 5);
    const auto p = cluster_edges(g, 3, 1);
    ExpertOptions o;
    o.misconceptions = Misconceptions::kShared;
    const auto experts = build_selection_experts(g, p, 6, 0.2, 3, o);
    std::map<std::size_t, Fact> wrong;
    for (const auto& e : experts) {
      for (const auto& pf : e.facts) {
        if (!pf.corrupted) continue;
        auto [it, fresh] = wrong.emplace(pf.source, pf.fact);
        if (!fresh) CHECK(it->second == pf.fact);
      }
    }
    CHECK(!wrong.empty());
  }

  TEST_CASE("generalization experts partition the graph") {
    const auto g = random_graph(40, 3, 100, 6);
    const auto p = cluster_edges(g, 3, 2);
    const auto experts = build_generalization_experts(g, p);
    CHECK(experts.size() == p.non_empty());
    std::multiset<std::size_t> sources;
    for (const auto& e : experts) {
      CHECK(e.corrupted_count() == 0);
      for (const auto& pf : e.facts) sources.insert(pf.source);
    }
    CHECK(sources.size() == g.num_facts());
    CHECK(std::set<std::size_t>(sources.begin(), sources.end()).size() == g.num_facts());
    CHECK(union_coverage(g, experts) == 1.0);

    // Expert j reaches exactly the within-cluster two-hops of its cluster.
    const auto split = within_cluster_two_hops(g, p);
    for (const auto& e : experts) {
      std::vector<char> kept(g.num_facts(), 0);
      for (const auto& pf : e.facts) kept[pf.source] = 1;
      const std::uint32_t cl = e.facts.front().cluster;
      for (const auto& t : split.across) CHECK_FALSE(oracle::reachable(g, kept, t));
      for (const auto& t : split.within) {
        const auto i = *g.fact_index({t.head, t.r1, t.bridge});
        CHECK(oracle::reachable(g, kept, t) == (p.assignment[i] == cl));
      }
    }
  }

  TEST_CASE("expert JSON round trip") {
    const auto g = random_graph(30, 2, 80, 7);
    const auto p = cluster_edges(g, 3, 2);
    const auto experts = build_selection_experts(g, p, 4, 0.3, 1);
    CHECK(experts_from_json(experts_to_json(experts), &p) == experts);
    const auto den = build_denoising_experts(g, 3, 0.4, 1);
    CHECK(experts_from_json(experts_to_json(den), nullptr) == den);
  }
}
