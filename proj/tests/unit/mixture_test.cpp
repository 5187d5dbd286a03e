#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tlab/clustering.hpp"
#include "tlab/corpus.hpp"
#include "tlab/error.hpp"
#include "tlab/experts.hpp"
#include "tlab/graph_gen.hpp"
#include "tlab/mixture.hpp"

using namespace tlab;
using tlab::testing::make_graph;
using tlab::testing::random_graph;

namespace {

Sample level1(const KnowledgeGraph& g, const Fact& f) {
  Sample s;
  s.text = render_sentence(g, f, 1, 0);
  s.fact_ids = {0};
  s.corrupted = {false};
  return s;
}

MixtureModel point_model(QueryKey key, std::vector<TailProb> dist) {
  std::vector<ConditionalTable::Entry> entries;
  for (const auto& tp : dist) entries.push_back({key.packed(), tp.tail, tp.p});
  MixtureModel m;
  m.table = ConditionalTable::from_entries(entries);
  return m;
}

// r_x of an expert by direct enumeration of its personal facts.
double brute_expert_reward(const KnowledgeGraph& g, const ExpertProfile& e, double alpha) {
  std::map<QueryKey, std::pair<double, double>> per;  // (true mass, total mass)
  for (const auto& pf : e.facts) {
    const double w = emission_weight(e, pf, alpha);
    auto& [good, total] = per[{pf.fact.head, pf.fact.relation}];
    total += w;
    if (g.contains(pf.fact)) good += w;
  }
  double r = 0.0;
  for (const Fact& f : g.facts()) {
    auto it = per.find({f.head, f.relation});
    if (it == per.end() || it->second.second == 0.0) continue;
    r += it->second.first / it->second.second / static_cast<double>(g.num_facts());
  }
  return r;
}

double max_tv(const MixtureModel& exact, const MixtureModel& empirical) {
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.table.size(); ++i) {
    std::map<EntityId, double> diff;
    for (const auto& tp : exact.table.at(i)) diff[tp.tail] += tp.p;
    for (const auto& tp : empirical.conditional(exact.table.key(i))) diff[tp.tail] -= tp.p;
    double tv = 0.0;
    for (const auto& [t, v] : diff) tv += std::abs(v);
    worst = std::max(worst, tv / 2.0);
  }
  return worst;
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("one perfect expert is certain on single-tail prefixes") {
    const auto g = random_graph(30, 2, 70, 1);
    const auto experts = build_denoising_experts(g, 1, 1.0, 1);
    const auto m = exact_mixture(experts, 0.0, {1.0});
    for (const Fact& f : g.facts()) {
      if (g.answers(f.head, f.relation).size() != 1) continue;
      const auto dist = m.conditional({f.head, f.relation});
      REQUIRE(dist.size() == 1);
      CHECK(dist[0].tail == f.tail);
      CHECK(dist[0].p == 1.0);
    }
    Rng rng(0);
    CHECK(query_accuracy(m, g, 0.0, 3) == 1.0);
    CHECK(m.normalization_error() < 1e-12);
  }

  TEST_CASE("symmetric disagreement splits evenly") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r"}, {{"a", "r", "b"}});
    ExpertProfile right;
    right.coverage = {1.0};
    right.facts = {{{0, 0, 1}, 0, 0, false}};
    ExpertProfile wrong = right;
    wrong.expert_id = 1;
    wrong.coverage = {0.0};
    wrong.facts = {{{0, 0, 2}, 0, 0, true}};
    const auto m = exact_mixture({right, wrong}, 0.0, {0.5, 0.5});
    const auto dist = m.conditional({0, 0});
    REQUIRE(dist.size() == 2);
    CHECK(dist[0].p == doctest::Approx(0.5));
    CHECK(dist[1].p == doctest::Approx(0.5));
    CHECK(m.posterior(0, {0, 0}) == doctest::Approx(0.5));
  }

  TEST_CASE("exact mixture matches a 10^6-sample corpus") {
    auto gc = GraphGenConfig::desk(2);
    gc.n_entities = 100;
    gc.target_edges = 200;
    gc.communities = 5;
    const auto g = generate_graph(gc);
    const auto experts = build_denoising_experts(g, 5, 0.5, 4);
    CorpusConfig cc;
    cc.total_samples = 1000000;
    cc.seed = 5;
    cc.workers = 4;
    const auto corpus = generate_corpus(g, experts, cc);
    const auto empirical = fit_empirical(g, corpus.samples);
    const auto exact = exact_mixture(experts, cc);
    CHECK(max_tv(exact, empirical) <= 0.02);
    CHECK(empirical.normalization_error() <= 1e-9);
  }

  TEST_CASE("counting estimator") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r"},
                              {{"a", "r", "b"}, {"a", "r", "c"}});
    const Sample sb = level1(g, {0, 0, 1});
    const Sample sc = level1(g, {0, 0, 2});
    const std::vector<Sample> one = {sb};
    const auto m1 = fit_empirical(g, one);
    REQUIRE(m1.conditional({0, 0}).size() == 1);
    CHECK(m1.conditional({0, 0})[0].p == 1.0);

    const std::vector<Sample> four = {sb, sb, sb, sc};
    const auto m4 = fit_empirical(g, four);
    const auto dist = m4.conditional({0, 0});
    REQUIRE(dist.size() == 2);
    CHECK(dist[0] == TailProb{1, 0.75});
    CHECK(dist[1] == TailProb{2, 0.25});
  }

  TEST_CASE("streaming fit reports the bad line") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}}, {"r"}, {{"a", "r", "b"}});
    std::istringstream in(sample_to_jsonl(level1(g, {0, 0, 1})) + "[]\n");
    try {
      fit_empirical(g, in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("prediction and temperature") {
    const QueryKey key{0, 0};
    const auto m = point_model(key, {{1, 0.6}, {2, 0.4}});
    Rng rng(1);
    CHECK(predict(m, key, 0.0, rng) == EntityId{1});
    CHECK_FALSE(predict(m, {5, 5}, 0.0, rng).has_value());
    CHECK_THROWS_AS(predict(m, key, -1.0, rng), ValidationError);

    const auto ties = point_model(key, {{3, 0.5}, {2, 0.5}});
    CHECK(predict(ties, key, 0.0, rng) == EntityId{2});
  }

  TEST_CASE("tau = 1 sampling follows the conditional") {
    const QueryKey key{0, 0};
    const auto m = point_model(key, {{1, 0.5}, {2, 0.3}, {3, 0.2}});
    Rng rng(2);
    std::map<EntityId, double> counts;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[*predict(m, key, 1.0, rng)] += 1;
    const std::map<EntityId, double> p = {{1, 0.5}, {2, 0.3}, {3, 0.2}};
    double chi2 = 0.0;
    for (const auto& [t, q] : p) chi2 += std::pow(counts[t] - q * draws, 2) / (q * draws);
    CHECK(chi2 < 13.8);  // 2 dof, 99.9th percentile
  }

  TEST_CASE("the mode survives any temperature") {
    const QueryKey key{0, 0};
    const auto m = point_model(key, {{4, 0.4}, {5, 0.35}, {6, 0.25}});
    for (double tau : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      Rng rng(static_cast<std::uint64_t>(tau * 100));
      std::map<EntityId, int> counts;
      for (int i = 0; i < 40000; ++i) ++counts[*predict(m, key, tau, rng)];
      EntityId mode = 0;
      int best = -1;
      for (const auto& [t, n] : counts) {
        if (n > best) {
          best = n;
          mode = t;
        }
      }
      CHECK(mode == 4);
    }
  }

  TEST_CASE("expert rewards") {
    const auto g = random_graph(30, 3, 80, 3);
    const auto spec = RewardSpec::uniform_over_facts(g);
    spec.validate();
    const auto perfect = build_denoising_experts(g, 1, 1.0, 1).front();
    CHECK(expert_reward(g, perfect, spec, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const auto hopeless = build_denoising_experts(g, 1, 0.0, 1).front();
    CHECK(std::abs(expert_reward(g, hopeless, spec, 0.0) - brute_expert_reward(g, hopeless, 0.0)) <
          1e-12);

    const auto p = cluster_edges(g, 3, 1);
    ExpertOptions o;
    o.on_uncorruptible = OnUncorruptible::kKeepCorrect;
    const auto sel = build_selection_experts(g, p, 5, 0.4, 2, o);
    for (const auto& e : sel) {
      for (double alpha : {0.0, 0.5, 0.9}) {
        CHECK(std::abs(expert_reward(g, e, spec, alpha) - brute_expert_reward(g, e, alpha)) <
              1e-12);
      }
    }
  }

  TEST_CASE("two-expert statistic") {
    const TwoExpertTerm t{1.0, 1.0, 0.0, 0.9, 0.1};
    const std::vector<TwoExpertTerm> one = {t};
    CHECK(two_expert_statistic(one) == doctest::Approx(0.8));
    const std::vector<TwoExpertTerm> sym = {{0.5, 0.7, 0.7, 0.8, 0.2}, {0.5, 0.1, 0.1, 0.3, 0.7}};
    CHECK(two_expert_statistic(sym) == 0.0);
    const std::vector<TwoExpertTerm> bad = {{1.0, 1.0, 0.0, 0.9, 0.2}};
    CHECK_THROWS_AS(two_expert_statistic(bad), ValidationError);
  }

  TEST_CASE("transcendence flags") {
    const auto g = random_graph(20, 2, 50, 4);
    const auto spec = RewardSpec::uniform_over_facts(g);
    const auto single = build_denoising_experts(g, 1, 0.5, 1);
    CHECK_FALSE(transcendence_report(g, exact_mixture(single, 0.0, {1.0}), spec, 1.0).transcends);

    // Complementary perfect specialists over two halves of the graph.
    std::vector<std::uint32_t> assign(g.num_facts());
    for (std::size_t i = 0; i < assign.size(); ++i) assign[i] = i % 2;
    const auto p = EdgePartition::from_assignment(2, assign);
    ExpertOptions o;
    o.on_uncorruptible = OnUncorruptible::kKeepCorrect;
    const auto experts = build_experts_from_coverage(g, p, {{1.0, 0.0}, {0.0, 1.0}}, 3, o);
    const auto m = exact_mixture(experts, 1.0, {0.5, 0.5});
    const auto r = transcendence_report(g, m, spec, 0.0);
    CHECK(r.transcends);
    CHECK(r.model_reward == doctest::Approx(1.0));
    CHECK(r.max_expert_reward < 1.0);
    REQUIRE(r.statistic.has_value());
  }

  TEST_CASE("rewards agree with exact arithmetic on random configurations") {
    Rng rng(8);
    int checked = 0;
    for (int trial = 0; trial < 300 && checked < 100; ++trial) {
      const auto g = random_graph(8, 2, 10, rng.next(), 2);
      std::vector<std::uint32_t> assign(g.num_facts());
      for (auto& a : assign) a = static_cast<std::uint32_t>(rng.index(2));
      const auto p = EdgePartition::from_assignment(2, assign);
      std::vector<std::vector<double>> cov(2, std::vector<double>(2));
      std::vector<std::vector<oracle::Rational>> covq(2, std::vector<oracle::Rational>(2));
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          const long long q = static_cast<long long>(rng.index(5));
          cov[i][j] = static_cast<double>(q) / 4.0;
          covq[i][j] = oracle::Rational(q, 4);
        }
      }
      ExpertOptions o;
      o.on_uncorruptible = OnUncorruptible::kKeepCorrect;
      const auto experts = build_experts_from_coverage(g, p, cov, rng.next(), o);
      MixtureModel m;
      try {
        m = exact_mixture(experts, 0.5, {0.5, 0.5});
      } catch (const ValidationError&) {
        continue;
      }
      ++checked;
      const auto ex = oracle::two_expert_exact(g, experts[0], experts[1], covq,
                                               oracle::Rational(1, 2), 1, 1);
      const auto spec = RewardSpec::uniform_over_facts(g);
      CHECK(std::abs(expected_reward(m, g, spec, 1.0) - ex.mixture_reward.convert_to<double>()) <
            1e-12);
      CHECK(std::abs(component_reward(g, m.components[0], spec) -
                     ex.reward_a.convert_to<double>()) < 1e-12);
    }
    CHECK(checked == 100);
  }
}
