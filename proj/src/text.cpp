#include "tlab/text.hpp"

#include <unordered_map>

#include "tlab/error.hpp"

namespace tlab {
namespace {

struct LexiconEntry {
  RelationLexicon lexicon;
  // Optional relation-specific replacements for templates 1..3.
  std::vector<std::string> alternates;
};

const std::unordered_map<std::string, LexiconEntry>& builtin_lexicon() {
  static const std::unordered_map<std::string, LexiconEntry> table = {
      {"award_received", {{"award received", "by"}, {"{head} received the award {tail}."}}},
      {"place_of_birth", {{"place of birth", "of"}, {"{head} was born in {tail}."}}},
      {"place_of_death", {{"place of death", "of"}, {"{head} died in {tail}."}}},
      {"capital", {{"capital", "of"}, {"{tail} is the capital city of {head}."}}},
      {"founded_by", {{"founder", "of"}, {"{head} was founded by {tail}."}}},
      {"screenwriter", {{"screenwriter", "of"}, {"{head} was written by {tail}."}}},
      {"director", {{"director", "of"}, {"{head} was directed by {tail}."}}},
      {"director_manager", {{"director or manager", "of"}, {}}},
      {"conferred_by", {{"conferring body", "of"}, {"{head} is conferred by {tail}."}}},
      {"shares_border_with", {{"neighbouring country", "of"}, {"{head} borders {tail}."}}},
      {"indigenous_to", {{"homeland", "of"}, {}}},
      {"educated_at", {{"alma mater", "of"}, {"{head} was educated at {tail}."}}},
  };
  return table;
}

SentenceTemplate compile(const std::string& pattern) {
  const auto h = pattern.find("{head}");
  const auto t = pattern.find("{tail}");
  if (h == std::string::npos || t == std::string::npos) {
    throw ValidationError("template without {head}/{tail}: " + pattern);
  }
  SentenceTemplate out;
  out.head_first = h < t;
  const auto first = std::min(h, t);
  const auto second = std::max(h, t);
  out.pre = pattern.substr(0, first);
  out.mid = pattern.substr(first + 6, second - first - 6);
  out.post = pattern.substr(second + 6);
  return out;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

}  // namespace

RelationLexicon lexicon_for(std::string_view relation_name) {
  const auto& table = builtin_lexicon();
  if (auto it = table.find(std::string(relation_name)); it != table.end()) {
    return it->second.lexicon;
  }
  RelationLexicon lex;
  lex.noun = std::string(relation_name);
  for (char& c : lex.noun) {
    if (c == '_') c = ' ';
  }
  return lex;
}

std::string SentenceTemplate::fill(std::string_view head, std::string_view tail) const {
  std::string out = pre;
  out += head_first ? head : tail;
  out += mid;
  out += head_first ? tail : head;
  out += post;
  return out;
}

std::array<SentenceTemplate, 4> templates_for(std::string_view relation_name) {
  const RelationLexicon lex = lexicon_for(relation_name);
  const std::string conn_noun = lex.noun + " " + lex.connector;
  std::vector<std::string> patterns = {
      "The " + conn_noun + " {head} is {tail}.",
      "{head}'s " + lex.noun + " is {tail}.",
      "{tail} is the " + conn_noun + " {head}.",
      "For {head}, the " + lex.noun + " is {tail}.",
  };
  const auto& table = builtin_lexicon();
  if (auto it = table.find(std::string(relation_name)); it != table.end()) {
    // Relation-specific phrasings replace the generic ones from the end.
    for (std::size_t i = 0; i < it->second.alternates.size() && i < 3; ++i) {
      patterns[3 - i] = it->second.alternates[i];
    }
  }
  std::array<SentenceTemplate, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = compile(patterns[i]);
  return out;
}

std::string render_sentence(const KnowledgeGraph& graph, const Fact& fact, int diversity_level,
                            Rng& rng) {
  if (diversity_level < 1 || diversity_level > 4) {
    throw ValidationError("unknown diversity level " + std::to_string(diversity_level));
  }
  const auto templates = templates_for(graph.relation(fact.relation).name);
  const std::size_t which = diversity_level == 1 ? 0 : rng.index(4);
  return templates[which].fill(graph.entity(fact.head).name, graph.entity(fact.tail).name);
}

std::string render_sentence(const KnowledgeGraph& graph, const Fact& fact, int diversity_level,
                            std::uint64_t seed) {
  Rng rng(seed);
  return render_sentence(graph, fact, diversity_level, rng);
}

std::string to_string(TwoHopFormat f) { return f == TwoHopFormat::kCot ? "cot" : "plain"; }

TwoHopFormat parse_two_hop_format(const std::string& s) {
  if (s == "plain") return TwoHopFormat::kPlain;
  if (s == "cot") return TwoHopFormat::kCot;
  throw ValidationError("unknown two-hop format '" + s + "'");
}

std::string two_hop_sentence(const KnowledgeGraph& graph, const TwoHopFact& fact,
                             TwoHopFormat format) {
  const RelationLexicon l1 = lexicon_for(graph.relation(fact.r1).name);
  const RelationLexicon l2 = lexicon_for(graph.relation(fact.r2).name);
  const std::string chain = l2.noun + " " + l2.connector + " the " + l1.noun + " " +
                            l1.connector + " " + graph.entity(fact.head).name;
  if (format == TwoHopFormat::kCot) {
    return "What is the " + chain + "? " + graph.entity(fact.bridge).name + "; " +
           graph.entity(fact.tail).name + ".";
  }
  return "The " + chain + " is " + graph.entity(fact.tail).name + ".";
}

TemplateParser::TemplateParser(const KnowledgeGraph& graph) : graph_(&graph) {
  for (const Relation& r : graph.relations()) {
    lexicon_.push_back(lexicon_for(r.name));
    for (const auto& t : templates_for(r.name)) patterns_.push_back({r.id, t});
  }
}

std::optional<EntityId> TemplateParser::resolve(std::string_view name) const {
  return graph_->find_entity(name);
}

std::optional<Fact> TemplateParser::parse_sentence(std::string_view sentence) const {
  std::optional<Fact> found;
  for (const Pattern& p : patterns_) {
    const SentenceTemplate& t = p.tmpl;
    if (!starts_with(sentence, t.pre) || !ends_with(sentence, t.post)) continue;
    if (sentence.size() < t.pre.size() + t.post.size()) continue;
    const std::string_view body =
        sentence.substr(t.pre.size(), sentence.size() - t.pre.size() - t.post.size());
    for (std::size_t pos = body.find(t.mid); pos != std::string_view::npos;
         pos = body.find(t.mid, pos + 1)) {
      const auto a = resolve(body.substr(0, pos));
      const auto b = resolve(body.substr(pos + t.mid.size()));
      if (!a || !b) continue;
      Fact f{t.head_first ? *a : *b, p.relation, t.head_first ? *b : *a};
      if (found && *found != f) {
        throw ValidationError("ambiguous sentence: " + std::string(sentence));
      }
      found = f;
    }
  }
  return found;
}

std::vector<Fact> TemplateParser::parse_paragraph(std::string_view paragraph) const {
  std::vector<Fact> out;
  std::size_t start = 0;
  while (start < paragraph.size()) {
    std::size_t end = paragraph.find(". ", start);
    const std::size_t stop = end == std::string_view::npos ? paragraph.size() : end + 1;
    const std::string_view sentence = paragraph.substr(start, stop - start);
    auto f = parse_sentence(sentence);
    if (!f) throw ValidationError("unparseable sentence: " + std::string(sentence));
    out.push_back(*f);
    start = end == std::string_view::npos ? paragraph.size() : end + 2;
  }
  return out;
}

std::optional<TwoHopQuery> TemplateParser::parse_two_hop_plain(std::string_view sentence) const {
  if (!starts_with(sentence, "The ") || !ends_with(sentence, ".")) return std::nullopt;
  const std::size_t nr = graph_->num_relations();
  for (RelationId r2 = 0; r2 < nr; ++r2) {
    const std::string p2 = "The " + lexicon_[r2].noun + " " + lexicon_[r2].connector + " the ";
    if (!starts_with(sentence, p2)) continue;
    const std::string_view rest = sentence.substr(p2.size());
    for (RelationId r1 = 0; r1 < nr; ++r1) {
      const std::string p1 = lexicon_[r1].noun + " " + lexicon_[r1].connector + " ";
      if (!starts_with(rest, p1)) continue;
      const std::string_view body = rest.substr(p1.size(), rest.size() - p1.size() - 1);
      for (std::size_t pos = body.find(" is "); pos != std::string_view::npos;
           pos = body.find(" is ", pos + 1)) {
        const auto h = resolve(body.substr(0, pos));
        const auto t = resolve(body.substr(pos + 4));
        if (h && t) return TwoHopQuery{*h, r1, r2, *t};
      }
    }
  }
  return std::nullopt;
}

bool retains_names(std::string_view text, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (text.find(n) == std::string_view::npos) return false;
  }
  return true;
}

}  // namespace tlab
