#include <doctest.h>

#include <map>

#include "helpers.hpp"
#include "tlab/error.hpp"
#include "tlab/text.hpp"

using namespace tlab;
using tlab::testing::make_graph;

namespace {

KnowledgeGraph table_graph() {
  return make_graph({{"Glimmerhold", "person"}, {"Galadron Abyss", "city"}}, {"place_of_death"},
                    {{"Glimmerhold", "place_of_death", "Galadron Abyss"}});
}

KnowledgeGraph cot_graph() {
  return make_graph({{"Glyndor Aetheralis", "work"},
                     {"Ithryndor Glaciaris", "person"},
                     {"Xyphorian Starblossom", "award"}},
                    {"screenwriter", "award_received"},
                    {{"Glyndor Aetheralis", "screenwriter", "Ithryndor Glaciaris"},
                     {"Ithryndor Glaciaris", "award_received", "Xyphorian Starblossom"}});
}

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("level 1 sentence") {
    const auto g = table_graph();
    CHECK(render_sentence(g, g.facts()[0], 1, 0) ==
          "The place of death of Glimmerhold is Galadron Abyss.");
  }

  TEST_CASE("level 2 uses four templates uniformly") {
    const auto g = table_graph();
    Rng rng(5);
    std::map<std::string, double> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) counts[render_sentence(g, g.facts()[0], 2, rng)] += 1;
    REQUIRE(counts.size() == 4);
    CHECK(counts.count("Glimmerhold died in Galadron Abyss.") == 1);
    double chi2 = 0.0;
    for (const auto& [s, n] : counts) chi2 += (n - draws / 4.0) * (n - draws / 4.0) / (draws / 4.0);
    CHECK(chi2 < 16.3);  // 3 dof, 99.9th percentile
  }

  TEST_CASE("every level keeps both names") {
    const auto g = cot_graph();
    for (int level = 1; level <= 4; ++level) {
      for (const Fact& f : g.facts()) {
        for (std::uint64_t s = 0; s < 20; ++s) {
          const auto text = render_sentence(g, f, level, s);
          CHECK(retains_names(text, {g.entity(f.head).name, g.entity(f.tail).name}));
        }
      }
    }
    CHECK_THROWS_AS(render_sentence(g, g.facts()[0], 5, 0), ValidationError);
  }

  TEST_CASE("chain-of-thought two-hop line") {
    const auto g = cot_graph();
    const TwoHopFact t{0, 0, 1, 1, 2};
    CHECK(two_hop_sentence(g, t, TwoHopFormat::kCot) ==
          "What is the award received by the screenwriter of Glyndor Aetheralis? "
          "Ithryndor Glaciaris; Xyphorian Starblossom.");
  }

  TEST_CASE("plain two-hop line hides the bridge and parses back") {
    const auto g = cot_graph();
    const TwoHopFact t{0, 0, 1, 1, 2};
    const auto plain = two_hop_sentence(g, t, TwoHopFormat::kPlain);
    CHECK(plain.find("Xyphorian Starblossom") != std::string::npos);
    CHECK(plain.find("Ithryndor Glaciaris") == std::string::npos);
    const TemplateParser parser(g);
    const auto q = parser.parse_two_hop_plain(plain);
    REQUIRE(q.has_value());
    CHECK(*q == TwoHopQuery{0, 0, 1, 2});
  }

  TEST_CASE("parser recovers facts from every level-1/2 template") {
    const auto g = testing::random_graph(20, 4, 40, 3);
    // Rename relations to catalog names so relation-specific templates apply.
    std::vector<Relation> rels = {{0, "place_of_death"}, {1, "award_received"}, {2, "capital"},
                                  {3, "founded_by"}};
    const auto named = KnowledgeGraph::build(g.entities(), rels, g.facts());
    const TemplateParser parser(named);
    for (const Fact& f : named.facts()) {
      for (const auto& tmpl : templates_for(named.relation(f.relation).name)) {
        const auto s = tmpl.fill(named.entity(f.head).name, named.entity(f.tail).name);
        const auto parsed = parser.parse_sentence(s);
        REQUIRE(parsed.has_value());
        CHECK(*parsed == f);
      }
    }
    CHECK_FALSE(parser.parse_sentence("Nothing to see here.").has_value());
    CHECK_THROWS_AS(parser.parse_paragraph("Nothing to see here."), ValidationError);
  }

  TEST_CASE("two-hop format names") {
    CHECK(parse_two_hop_format(to_string(TwoHopFormat::kCot)) == TwoHopFormat::kCot);
    CHECK(parse_two_hop_format(to_string(TwoHopFormat::kPlain)) == TwoHopFormat::kPlain);
    CHECK_THROWS_AS(parse_two_hop_format("prose"), ValidationError);
  }
}
