#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tlab/error.hpp"
#include "tlab/kg.hpp"

using namespace tlab;
using tlab::testing::make_graph;
using tlab::testing::random_graph;

TEST_SUITE("kg") {
  TEST_CASE("single fact graph indexes its answer") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r"}, {{"a", "r", "b"}});
    CHECK(g.num_facts() == 1);
    const auto ans = g.answers(0, 0);
    REQUIRE(ans.size() == 1);
    CHECK(ans[0] == 1);
  }

  TEST_CASE("dangling references are rejected") {
    CHECK_THROWS_WITH_AS(make_graph({{"a", "x"}, {"b", "x"}}, {"r"}, {{"a", "r", "zz"}}),
                         doctest::Contains("dangling reference"), ValidationError);
  }

  TEST_CASE("self-loops and duplicates are rejected") {
    CHECK_THROWS_AS(make_graph({{"a", "x"}}, {"r"}, {{"a", "r", "a"}}), ValidationError);
    CHECK_THROWS_AS(make_graph({{"a", "x"}, {"b", "x"}}, {"r"}, {{"a", "r", "b"}, {"a", "r", "b"}}),
                    ValidationError);
  }

  TEST_CASE("multi-tail and empty queries") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r", "s"},
                              {{"a", "r", "b"}, {"a", "r", "c"}});
    const auto ans = g.answers(0, 0);
    CHECK(std::vector<EntityId>(ans.begin(), ans.end()) == std::vector<EntityId>{1, 2});
    CHECK(g.answers(0, 1).empty());
    CHECK(g.answers(1, 0).empty());
  }

  TEST_CASE("every fact's tail is among its answers") {
    const auto g = random_graph(40, 3, 100, 11);
    for (const Fact& f : g.facts()) {
      bool found = false;
      for (EntityId t : g.answers(f.head, f.relation)) found = found || t == f.tail;
      CHECK(found);
    }
  }

  TEST_CASE("two-hop enumeration") {
    const auto g = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r1", "r2"},
                              {{"a", "r1", "b"}, {"b", "r2", "c"}});
    const auto hops = enumerate_two_hop(g);
    REQUIRE(hops.size() == 1);
    CHECK(hops[0] == TwoHopFact{0, 0, 1, 1, 2});

    const auto flat = make_graph({{"a", "x"}, {"b", "x"}, {"c", "x"}}, {"r"},
                                 {{"a", "r", "b"}, {"c", "r", "b"}});
    CHECK(enumerate_two_hop(flat).empty());
  }

  TEST_CASE("two-hop path count matches brute force and degree identity") {
    const auto g = random_graph(20, 2, 50, 5);
    std::size_t brute = 0;
    for (const Fact& a : g.facts()) {
      for (const Fact& b : g.facts()) brute += a.tail == b.head ? 1 : 0;
    }
    CHECK(two_hop_path_count(g) == brute);
    const auto d = degree_profile(g);
    std::size_t identity = 0;
    for (std::size_t v = 0; v < g.num_entities(); ++v) identity += d.in_degree[v] * d.out_degree[v];
    CHECK(identity == brute);
    CHECK(enumerate_two_hop(g) == oracle::all_two_hops(g));
  }

  TEST_CASE("degree profile") {
    const auto single = make_graph({{"a", "x"}, {"b", "x"}}, {"r"}, {{"a", "r", "b"}});
    const auto d = degree_profile(single);
    CHECK(d.in_degree[1] == 1);
    CHECK(d.out_degree[0] == 1);
    CHECK(d.total_in == 1);
    CHECK(d.total_out == 1);

    std::vector<std::pair<std::string, std::string>> es = {{"a", "x"}};
    std::vector<std::tuple<std::string, std::string, std::string>> fs;
    for (int i = 1; i <= 5; ++i) {
      es.push_back({"b" + std::to_string(i), "x"});
      fs.push_back({"a", "r", "b" + std::to_string(i)});
    }
    const auto star = degree_profile(make_graph(es, {"r"}, fs));
    CHECK(star.out_degree[0] == 5);
    CHECK(star.total_in == 5);

    const auto g = random_graph(30, 2, 80, 9);
    const auto dp = degree_profile(g);
    std::size_t sum_in = 0;
    for (auto v : dp.in_degree) sum_in += v;
    CHECK(sum_in == g.num_facts());
  }

  TEST_CASE("serialization round trip and truncation") {
    const auto g = random_graph(25, 3, 60, 3, 2);
    const std::string text = serialize(g);
    CHECK(deserialize(text) == g);
    CHECK(serialize(deserialize(text)) == text);
    CHECK_THROWS_AS(deserialize(text.substr(0, text.size() / 2)), ParseError);
  }

  TEST_CASE("schema fixture parses") {
    const std::string fixture =
        R"({"entities":[{"id":0,"name":"Ava","type":"person"},{"id":1,"name":"Bex","type":"city"}],)"
        R"("relations":[{"id":0,"name":"place_of_birth"}],"facts":[[0,0,1]]})";
    const auto g = deserialize(fixture);
    CHECK(g.num_entities() == 2);
    CHECK(g.contains({0, 0, 1}));
    CHECK(*g.find_entity("Bex") == 1);
  }

  TEST_CASE("structure hash ignores names") {
    const auto a = make_graph({{"a", "x"}, {"b", "x"}}, {"r"}, {{"a", "r", "b"}});
    const auto b = make_graph({{"p", "x"}, {"q", "x"}}, {"r"}, {{"p", "r", "q"}});
    CHECK(structure_hash(a) == structure_hash(b));
  }
}
