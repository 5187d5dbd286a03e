#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/kg.hpp"
#include "tlab/rng.hpp"

namespace tlab {

// Surface form of a relation: "The {noun} {connector} {head} is {tail}."
struct RelationLexicon {
  std::string noun;
  std::string connector = "of";
};

// Built-in entries for catalog relations; otherwise underscores become
// spaces and the connector is "of".
RelationLexicon lexicon_for(std::string_view relation_name);

// A sentence pattern with exactly one {head} and one {tail} slot.
struct SentenceTemplate {
  std::string pre;
  std::string mid;
  std::string post;
  bool head_first = true;

  std::string fill(std::string_view head, std::string_view tail) const;
};

// Index 0 is the canonical (level 1) template.
std::array<SentenceTemplate, 4> templates_for(std::string_view relation_name);

// Level 1: canonical template. Level 2: one of four templates, uniformly.
// Levels 3 and 4 render as level 2 here; rephrasing happens per paragraph.
// Throws ValidationError for levels outside 1..4.
std::string render_sentence(const KnowledgeGraph& graph, const Fact& fact, int diversity_level,
                            Rng& rng);
std::string render_sentence(const KnowledgeGraph& graph, const Fact& fact, int diversity_level,
                            std::uint64_t seed);

enum class TwoHopFormat { kPlain, kCot };

std::string to_string(TwoHopFormat f);
TwoHopFormat parse_two_hop_format(const std::string& s);

// Plain: "The {r2} the {r1} {head} is {tail}." with connectors, e.g.
// "The award received by the screenwriter of X is Y."
// CoT: "What is the {r2} the {r1} {head}? {bridge}; {tail}."
std::string two_hop_sentence(const KnowledgeGraph& graph, const TwoHopFact& fact,
                             TwoHopFormat format);

struct TwoHopQuery {
  EntityId head = 0;
  RelationId r1 = 0;
  RelationId r2 = 0;
  EntityId tail = 0;

  auto operator<=>(const TwoHopQuery&) const = default;
};

// Recovers facts from level 1/2 text. Entity names must not contain ". ".
class TemplateParser {
 public:
  explicit TemplateParser(const KnowledgeGraph& graph);

  // nullopt if no template matches with resolvable names.
  std::optional<Fact> parse_sentence(std::string_view sentence) const;
  // Splits on sentence boundaries; throws ValidationError on any
  // unparseable sentence.
  std::vector<Fact> parse_paragraph(std::string_view paragraph) const;
  std::optional<TwoHopQuery> parse_two_hop_plain(std::string_view sentence) const;

 private:
  struct Pattern {
    RelationId relation;
    SentenceTemplate tmpl;
  };
  std::optional<EntityId> resolve(std::string_view name) const;

  const KnowledgeGraph* graph_;
  std::vector<Pattern> patterns_;
  std::vector<RelationLexicon> lexicon_;
};

// Level 3/4 rewriting service. Returns nullopt when unavailable.
class RephraseProvider {
 public:
  virtual ~RephraseProvider() = default;
  virtual std::optional<std::string> rephrase(const std::string& text, int level) = 0;
};

class IdentityRephraser final : public RephraseProvider {
 public:
  std::optional<std::string> rephrase(const std::string& text, int) override { return text; }
};

class CallbackRephraser final : public RephraseProvider {
 public:
  using Fn = std::function<std::optional<std::string>(const std::string&, int)>;
  explicit CallbackRephraser(Fn fn) : fn_(std::move(fn)) {}
  std::optional<std::string> rephrase(const std::string& text, int level) override {
    return fn_(text, level);
  }

 private:
  Fn fn_;
};

// True if every name occurs verbatim in text.
bool retains_names(std::string_view text, const std::vector<std::string>& names);

}  // namespace tlab
