#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>

#include "tlab/error.hpp"
#include "tlab/gen_learner.hpp"
#include "tlab/graph_gen.hpp"

using namespace tlab;

TEST_SUITE("graph_gen") {
  TEST_CASE("small config is reproducible") {
    GraphGenConfig c;
    c.n_entities = 10;
    c.types = {{"thing", 1.0}};
    c.relations = {{"linked_to", "thing", "thing"}};
    c.target_edges = 5;
    c.seed = 7;
    const auto a = generate_graph(c);
    const auto b = generate_graph(c);
    CHECK(a.num_facts() == 5);
    CHECK(serialize(a) == serialize(b));
    c.seed = 8;
    CHECK(serialize(generate_graph(c)) != serialize(a));
  }

  TEST_CASE("desk preset shape and speed") {
    const auto start = std::chrono::steady_clock::now();
    const auto g = generate_graph(GraphGenConfig::desk(3));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(g.num_entities() == 1000);
    CHECK(g.num_relations() == 20);
    CHECK(g.type_index().size() == 8);
    CHECK(std::abs(static_cast<double>(g.num_facts()) - 5000.0) <= 50.0);
    CHECK(secs < 1.0);
  }

  TEST_CASE("facts respect relation typing") {
    const auto cfg = GraphGenConfig::desk(4);
    const auto g = generate_graph(cfg);
    for (const Fact& f : g.facts()) {
      const auto& spec = cfg.relations.at(f.relation);
      CHECK(g.relation(f.relation).name == spec.name);
      CHECK(g.entity(f.head).type == spec.head_type);
      CHECK(g.entity(f.tail).type == spec.tail_type);
    }
  }

  TEST_CASE("functional flag yields a functional graph") {
    auto cfg = GraphGenConfig::desk(5);
    cfg.functional = true;
    cfg.target_edges = 4000;
    CHECK(functional_check(generate_graph(cfg)).empty());
  }

  TEST_CASE("zero skew spreads head degrees uniformly") {
    GraphGenConfig c;
    c.n_entities = 40;
    c.types = {{"thing", 1.0}};
    c.relations = {{"linked_to", "thing", "thing"}};
    c.target_edges = 400;
    c.degree_skew = 0.0;
    // Pool out-degree counts over seeds, then chi-square against uniform.
    std::vector<double> counts(40, 0.0);
    double total = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      c.seed = s;
      const auto g = generate_graph(c);
      for (const Fact& f : g.facts()) counts[f.head] += 1.0;
      total += static_cast<double>(g.num_facts());
    }
    const double expected = total / 40.0;
    double chi2 = 0.0;
    for (double n : counts) chi2 += (n - expected) * (n - expected) / expected;
    // 39 degrees of freedom; 99.9th percentile is about 72.
    CHECK(chi2 < 72.0);
  }

  TEST_CASE("impossible edge targets are rejected") {
    GraphGenConfig c;
    c.n_entities = 3;
    c.types = {{"thing", 1.0}};
    c.relations = {{"linked_to", "thing", "thing"}};
    c.target_edges = 100;
    CHECK_THROWS_AS(generate_graph(c), ValidationError);
  }
}
