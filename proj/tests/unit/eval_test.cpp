#include <doctest.h>

#include <sstream>
#include <tuple>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tlab/clustering.hpp"
#include "tlab/error.hpp"
#include "tlab/eval.hpp"
#include "tlab/graph_gen.hpp"

using namespace tlab;
using tlab::testing::make_graph;

namespace {

KnowledgeGraph small_desk(std::uint64_t seed) {
  auto gc = GraphGenConfig::desk(seed);
  gc.n_entities = 300;
  gc.target_edges = 1000;
  gc.communities = 4;
  return generate_graph(gc);
}

// a_i -r-> b_i -s-> c_i for i < 10, with a_i -t-> c_i for the first `direct`.
KnowledgeGraph ladder(int direct) {
  std::vector<std::pair<std::string, std::string>> ents;
  std::vector<std::tuple<std::string, std::string, std::string>> facts;
  for (int i = 0; i < 10; ++i) {
    const auto n = std::to_string(i);
    ents.push_back({"a" + n, "person"});
    ents.push_back({"b" + n, "city"});
    ents.push_back({"c" + n, "country"});
    facts.push_back({"a" + n, "r", "b" + n});
    facts.push_back({"b" + n, "s", "c" + n});
    if (i < direct) facts.push_back({"a" + n, "t", "c" + n});
  }
  return make_graph(ents, {"r", "s", "t"}, facts);
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("simulation grid has one accuracy row per cell") {
    const auto g = small_desk(1);
    ExperimentSpec spec;
    spec.n_experts = {1, 10, 100};
    spec.coverage = {0.2, 0.5, 0.8};
    spec.temperature = {0.0, 1.0};
    spec.seeds = {3};
    const auto rows = run_experiment(g, nullptr, spec);
    std::size_t acc = 0;
    for (const auto& r : rows) {
      if (r.metric != "accuracy") continue;
      ++acc;
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      CHECK_FALSE(r.d_size.has_value());
      CHECK(r.seed == 3);
    }
    CHECK(acc == 18);
  }

  TEST_CASE("report bytes do not depend on worker count") {
    const auto g = small_desk(2);
    const auto p = cluster_edges(g, 10, 2);
    ExperimentSpec spec;
    spec.setting = Setting::kSelection;
    spec.n_experts = {5, 20};
    spec.coverage = {0.1, 0.3};
    spec.alpha = {0.0, 0.9};
    spec.seeds = {1, 2};
    const auto serial = report_csv(run_experiment(g, &p, spec));
    spec.workers = 4;
    const auto parallel = report_csv(run_experiment(g, &p, spec));
    CHECK(serial == parallel);
    CHECK(serial.rfind("# report-version: 1\n", 0) == 0);
  }

  TEST_CASE("report csv round trip") {
    std::vector<ReportRow> rows = {
        {"fig3", "denoising", 10, 0.2, 0.0, 1.0, std::nullopt, "accuracy", 0.8125, 7},
        {"gen", "generalization", 0, 0.0, 0.0, 0.0, 4096, "acc_across", 1.0, 1},
        {"x", "selection", 100, 0.1, 0.95, 0.25, std::nullopt, "transcends", 0.0, 0}};
    std::stringstream ss;
    write_report_csv(ss, rows);
    CHECK(ss.str() == report_csv(rows));
    CHECK(read_report_csv(ss) == rows);

    std::istringstream bad("# report-version: 1\nexperiment,setting\n");
    CHECK_THROWS_AS(read_report_csv(bad), ValidationError);
  }

  TEST_CASE("direct connection baseline") {
    const auto g = ladder(9);
    const auto queries = oracle::all_two_hops(g);
    REQUIRE(queries.size() == 10);
    CHECK(direct_connection_baseline(g, queries) == doctest::Approx(0.9));
    CHECK(direct_connection_baseline(g, queries) == oracle::direct_connection(g, queries));
    CHECK(direct_connection_baseline(g, {}) == 0.0);
  }

  TEST_CASE("majority baseline on a uniform tail distribution") {
    const auto g = ladder(0);
    const auto queries = oracle::all_two_hops(g);
    // Every country is the tail of s once; the lowest id wins.
    CHECK(majority_relation_baseline(g, queries) == doctest::Approx(0.1));
    CHECK(majority_relation_baseline(g, queries) == oracle::majority_relation(g, queries));
    MajorityRelationPredictor pred(g);
    CHECK(pred.predict(1, "country") == g.find_entity("c0"));
    CHECK_FALSE(pred.predict(1, "person").has_value());
  }

  TEST_CASE("majority baseline follows the dominant tail") {
    auto facts = std::vector<std::tuple<std::string, std::string, std::string>>{
        {"a0", "r", "b0"}, {"a1", "r", "b1"}, {"a2", "r", "b2"},
        {"b0", "s", "z"},  {"b1", "s", "z"},  {"b2", "s", "y"}};
    const auto g = make_graph({{"a0", "p"}, {"a1", "p"}, {"a2", "p"}, {"b0", "c"}, {"b1", "c"},
                               {"b2", "c"}, {"y", "k"}, {"z", "k"}},
                              {"r", "s"}, facts);
    const auto queries = oracle::all_two_hops(g);
    CHECK(majority_relation_baseline(g, queries) == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("experiment spec validation") {
    ExperimentSpec spec;
    spec.coverage = {1.5};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.coverage = {0.2};
    spec.alpha = {-0.1};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    ExperimentSpec sel;
    sel.setting = Setting::kSelection;
    CHECK(sel.effective_misconceptions() == Misconceptions::kShared);
    CHECK(ExperimentSpec{}.effective_misconceptions() == Misconceptions::kIndependent);
  }
}
