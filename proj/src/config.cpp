#include "tlab/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  TomlValue value() {
    skip_ws();
    if (done()) fail("missing value");
    TomlValue v;
    v.line = line_;
    const char c = text_[pos_];
    if (c == '"') {
      v.kind = TomlValue::Kind::kString;
      v.s = string();
    } else if (c == '[') {
      v.kind = TomlValue::Kind::kArray;
      ++pos_;
      for (;;) {
        skip_ws();
        if (done()) fail("unterminated array");
        if (text_[pos_] == ']') {
          ++pos_;
          break;
        }
        v.array.push_back(value());
        if (v.array.back().kind == TomlValue::Kind::kArray) fail("nested arrays are not supported");
        skip_ws();
        if (!done() && text_[pos_] == ',') {
          ++pos_;
        } else if (done() || text_[pos_] != ']') {
          fail("expected ',' or ']' in array");
        }
      }
    } else {
      std::size_t end = pos_;
      while (end < text_.size() && text_[end] != ',' && text_[end] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[end]))) {
        ++end;
      }
      const std::string token(text_.substr(pos_, end - pos_));
      if (token == "true" || token == "false") {
        v.kind = TomlValue::Kind::kBool;
        v.b = token == "true";
      } else {
        scalar_number(token, v);
      }
      pos_ = end;
    }
    return v;
  }

  void expect_end() {
    skip_ws();
    if (!done()) fail("unexpected trailing characters");
  }

 private:
  bool done() const { return pos_ >= text_.size(); }
  void skip_ws() {
    while (!done() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, pos_ + 1); }

  std::string string() {
    ++pos_;  // opening quote
    std::string out;
    while (!done() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (done()) fail("unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (done()) fail("unterminated string");
    ++pos_;
    return out;
  }

  void scalar_number(const std::string& token, TomlValue& v) {
    if (token.empty()) fail("missing value");
    const bool looks_float = token.find_first_of(".eE") != std::string::npos ||
                             token == "inf" || token == "nan";
    errno = 0;
    char* end = nullptr;
    if (!looks_float) {
      const long long x = std::strtoll(token.c_str(), &end, 10);
      if (*end == '\0' && errno == 0) {
        v.kind = TomlValue::Kind::kInt;
        v.i = x;
        return;
      }
    } else {
      const double x = std::strtod(token.c_str(), &end);
      if (*end == '\0' && errno == 0) {
        v.kind = TomlValue::Kind::kFloat;
        v.d = x;
        return;
      }
    }
    fail("invalid value '" + token + "'");
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

bool valid_key(std::string_view k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return k.find("..") == std::string_view::npos;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Drops a trailing comment, respecting quoted strings.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(std::string_view text) {
  std::map<std::string, TomlValue> out;
  std::string table;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++lineno;
    const std::string line = trim(strip_comment(text.substr(start, nl - start)));
    start = nl + 1;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.size() < 3 || line.back() != ']' || line[1] == '[') {
        throw ParseError("malformed table header", lineno, 1);
      }
      table = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_key(table)) throw ParseError("invalid table name '" + table + "'", lineno, 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno, 1);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", lineno, 1);
    TomlParser parser(std::string_view(line).substr(eq + 1), lineno);
    TomlValue v = parser.value();
    parser.expect_end();
    const std::string full = table.empty() ? key : table + "." + key;
    if (!out.emplace(full, std::move(v)).second) {
      throw ParseError("duplicate key '" + full + "'", lineno, 1);
    }
  }
  return out;
}

namespace {

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
  throw ValidationError("config key '" + key + "' must be " + expected);
}

std::uint64_t as_u64(const std::string& key, const TomlValue& v) {
  if (v.kind != TomlValue::Kind::kInt || v.i < 0) bad_type(key, "a non-negative integer");
  return static_cast<std::uint64_t>(v.i);
}

double as_double(const std::string& key, const TomlValue& v) {
  if (v.kind == TomlValue::Kind::kInt) return static_cast<double>(v.i);
  if (v.kind != TomlValue::Kind::kFloat) bad_type(key, "a number");
  return v.d;
}

bool as_bool(const std::string& key, const TomlValue& v) {
  if (v.kind != TomlValue::Kind::kBool) bad_type(key, "a boolean");
  return v.b;
}

std::string as_string(const std::string& key, const TomlValue& v) {
  if (v.kind != TomlValue::Kind::kString) bad_type(key, "a string");
  return v.s;
}

template <typename T, typename F>
std::vector<T> as_list(const std::string& key, const TomlValue& v, F conv) {
  if (v.kind != TomlValue::Kind::kArray) bad_type(key, "an array");
  std::vector<T> out;
  for (const auto& e : v.array) out.push_back(static_cast<T>(conv(key, e)));
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt(std::uint64_t x) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "true" : "false"; }

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

template <typename T>
std::string fmt_list(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(static_cast<double>(xs[i]));
    } else {
      out += fmt(static_cast<std::uint64_t>(xs[i]));
    }
  }
  return out + "]";
}

struct KeySpec {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const TomlValue&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string scope_name(OneHopScope s) { return s == OneHopScope::kFull ? "full" : "incident"; }

const std::vector<KeySpec>& registry() {
  using V = const TomlValue&;
  using K = const std::string&;
  static const std::vector<KeySpec> keys = {
      {"seed", [](RunConfig& c, K k, V v) { c.seed = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(c.seed); }},
      {"out_dir", [](RunConfig& c, K k, V v) { c.out_dir = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.out_dir); }},
      {"workers", [](RunConfig& c, K k, V v) { c.workers = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.workers)); }},

      {"graph.preset", nullptr,  // applied first, see RunConfig::apply
       [](const RunConfig& c) { return quote(c.graph_preset); }},
      {"graph.n_entities", [](RunConfig& c, K k, V v) { c.graph.n_entities = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.graph.n_entities)); }},
      {"graph.n_relations", [](RunConfig& c, K k, V v) { c.n_relations = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.n_relations)); }},
      {"graph.target_edges", [](RunConfig& c, K k, V v) { c.graph.target_edges = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.graph.target_edges)); }},
      {"graph.degree_skew", [](RunConfig& c, K k, V v) { c.graph.degree_skew = as_double(k, v); },
       [](const RunConfig& c) { return fmt(c.graph.degree_skew); }},
      {"graph.communities", [](RunConfig& c, K k, V v) { c.graph.communities = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.graph.communities)); }},
      {"graph.community_mixing",
       [](RunConfig& c, K k, V v) { c.graph.community_mixing = as_double(k, v); },
       [](const RunConfig& c) { return fmt(c.graph.community_mixing); }},
      {"graph.functional", [](RunConfig& c, K k, V v) { c.graph.functional = as_bool(k, v); },
       [](const RunConfig& c) { return fmt(c.graph.functional); }},

      {"names.provider", [](RunConfig& c, K k, V v) { c.name_provider = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.name_provider); }},
      {"names.host", [](RunConfig& c, K k, V v) { c.name_host = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.name_host); }},
      {"names.port", [](RunConfig& c, K k, V v) { c.name_port = static_cast<int>(as_u64(k, v)); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.name_port)); }},
      {"names.path", [](RunConfig& c, K k, V v) { c.name_path = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.name_path); }},
      {"names.max_redraws", [](RunConfig& c, K k, V v) { c.name_max_redraws = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.name_max_redraws)); }},

      {"cluster.k", [](RunConfig& c, K k, V v) { c.k = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.k)); }},
      {"cluster.restarts", [](RunConfig& c, K k, V v) { c.cluster.restarts = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.cluster.restarts)); }},
      {"cluster.dense_limit", [](RunConfig& c, K k, V v) { c.cluster.dense_limit = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.cluster.dense_limit)); }},
      {"cluster.tolerance", [](RunConfig& c, K k, V v) { c.cluster.tolerance = as_double(k, v); },
       [](const RunConfig& c) { return fmt(c.cluster.tolerance); }},
      {"cluster.max_iterations",
       [](RunConfig& c, K k, V v) { c.cluster.max_iterations = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.cluster.max_iterations)); }},

      {"experts.setting", [](RunConfig& c, K k, V v) { c.setting = parse_setting(as_string(k, v)); },
       [](const RunConfig& c) { return quote(to_string(c.setting)); }},
      {"experts.n_experts", [](RunConfig& c, K k, V v) { c.n_experts = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.n_experts)); }},
      {"experts.coverage", [](RunConfig& c, K k, V v) { c.coverage = as_double(k, v); },
       [](const RunConfig& c) { return fmt(c.coverage); }},
      {"experts.misconceptions", [](RunConfig& c, K k, V v) { c.misconceptions = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.misconceptions); }},
      {"experts.on_uncorruptible",
       [](RunConfig& c, K k, V v) {
         const auto s = as_string(k, v);
         if (s == "error") {
           c.on_uncorruptible = OnUncorruptible::kError;
         } else if (s == "keep_correct") {
           c.on_uncorruptible = OnUncorruptible::kKeepCorrect;
         } else {
           throw ValidationError("experts.on_uncorruptible must be \"error\" or \"keep_correct\"");
         }
       },
       [](const RunConfig& c) {
         return quote(c.on_uncorruptible == OnUncorruptible::kError ? "error" : "keep_correct");
       }},

      {"corpus.total_samples",
       [](RunConfig& c, K k, V v) { c.corpus.total_samples = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.corpus.total_samples)); }},
      {"corpus.quota_mode",
       [](RunConfig& c, K k, V v) { c.corpus.quota_mode = parse_quota_mode(as_string(k, v)); },
       [](const RunConfig& c) { return quote(to_string(c.corpus.quota_mode)); }},
      {"corpus.alpha", [](RunConfig& c, K k, V v) { c.corpus.alpha = as_double(k, v); },
       [](const RunConfig& c) { return fmt(c.corpus.alpha); }},
      {"corpus.diversity_level",
       [](RunConfig& c, K k, V v) { c.corpus.diversity_level = static_cast<int>(as_u64(k, v)); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.corpus.diversity_level)); }},
      {"corpus.two_hop", [](RunConfig& c, K k, V v) { c.corpus.two_hop.include = as_bool(k, v); },
       [](const RunConfig& c) { return fmt(c.corpus.two_hop.include); }},
      {"corpus.validation_size",
       [](RunConfig& c, K k, V v) { c.corpus.two_hop.validation_size = as_u64(k, v); },
       [](const RunConfig& c) {
         return fmt(static_cast<std::uint64_t>(c.corpus.two_hop.validation_size));
       }},
      {"corpus.train_repeat",
       [](RunConfig& c, K k, V v) { c.corpus.two_hop.train_repeat = as_u64(k, v); },
       [](const RunConfig& c) {
         return fmt(static_cast<std::uint64_t>(c.corpus.two_hop.train_repeat));
       }},
      {"corpus.two_hop_format",
       [](RunConfig& c, K k, V v) {
         c.corpus.two_hop.format = parse_two_hop_format(as_string(k, v));
       },
       [](const RunConfig& c) { return quote(to_string(c.corpus.two_hop.format)); }},

      {"simulate.id", [](RunConfig& c, K k, V v) { c.simulate_id = as_string(k, v); },
       [](const RunConfig& c) { return quote(c.simulate_id); }},
      {"simulate.n_experts",
       [](RunConfig& c, K k, V v) { c.sim_n_experts = as_list<std::size_t>(k, v, as_u64); },
       [](const RunConfig& c) { return fmt_list(c.sim_n_experts); }},
      {"simulate.coverage",
       [](RunConfig& c, K k, V v) { c.sim_coverage = as_list<double>(k, v, as_double); },
       [](const RunConfig& c) { return fmt_list(c.sim_coverage); }},
      {"simulate.alpha",
       [](RunConfig& c, K k, V v) { c.sim_alpha = as_list<double>(k, v, as_double); },
       [](const RunConfig& c) { return fmt_list(c.sim_alpha); }},
      {"simulate.temperature",
       [](RunConfig& c, K k, V v) { c.sim_temperature = as_list<double>(k, v, as_double); },
       [](const RunConfig& c) { return fmt_list(c.sim_temperature); }},
      {"simulate.seeds",
       [](RunConfig& c, K k, V v) { c.sim_seeds = as_list<std::uint64_t>(k, v, as_u64); },
       [](const RunConfig& c) { return fmt_list(c.sim_seeds); }},
      {"simulate.learner",
       [](RunConfig& c, K k, V v) {
         const auto s = as_string(k, v);
         if (s != "exact" && s != "empirical") {
           throw ValidationError("simulate.learner must be \"exact\" or \"empirical\"");
         }
         c.sim_learner = s == "exact" ? MixtureKind::kExact : MixtureKind::kEmpirical;
       },
       [](const RunConfig& c) { return quote(to_string(c.sim_learner)); }},
      {"simulate.prior",
       [](RunConfig& c, K k, V v) {
         const auto s = as_string(k, v);
         if (s != "quota" && s != "uniform") {
           throw ValidationError("simulate.prior must be \"quota\" or \"uniform\"");
         }
         c.sim_prior = s == "quota" ? ExpertPrior::kQuota : ExpertPrior::kUniform;
       },
       [](const RunConfig& c) {
         return quote(c.sim_prior == ExpertPrior::kQuota ? "quota" : "uniform");
       }},

      {"generalize.kappa_comp",
       [](RunConfig& c, K k, V v) { c.kappa_comp = as_list<std::size_t>(k, v, as_u64); },
       [](const RunConfig& c) { return fmt_list(c.kappa_comp); }},
      {"generalize.validation_size",
       [](RunConfig& c, K k, V v) { c.gen_validation_size = as_u64(k, v); },
       [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.gen_validation_size)); }},
      {"generalize.one_hop_scope",
       [](RunConfig& c, K k, V v) {
         const auto s = as_string(k, v);
         if (s != "incident" && s != "full") {
           throw ValidationError("generalize.one_hop_scope must be \"incident\" or \"full\"");
         }
         c.one_hop_scope = s == "full" ? OneHopScope::kFull : OneHopScope::kIncident;
       },
       [](const RunConfig& c) { return quote(scope_name(c.one_hop_scope)); }},
      {"generalize.two_hop_cooccurrence",
       [](RunConfig& c, K k, V v) { c.two_hop_cooccurrence = as_bool(k, v); },
       [](const RunConfig& c) { return fmt(c.two_hop_cooccurrence); }},
  };
  return keys;
}

}  // namespace

void RunConfig::apply(const std::map<std::string, TomlValue>& doc) {
  if (auto it = doc.find("graph.preset"); it != doc.end()) {
    graph_preset = as_string(it->first, it->second);
    if (graph_preset == "desk") {
      graph = GraphGenConfig::desk();
      n_relations = 20;
    } else if (graph_preset == "reference") {
      graph = GraphGenConfig::reference();
      n_relations = 39;
    } else {
      throw ValidationError("graph.preset must be \"desk\" or \"reference\"");
    }
  }
  for (const auto& [key, value] : doc) {
    if (key == "graph.preset") continue;
    const KeySpec* spec = nullptr;
    for (const auto& k : registry()) {
      if (key == k.name) spec = &k;
    }
    if (spec == nullptr) {
      throw ValidationError("unknown config key '" + key + "' (line " +
                            std::to_string(value.line) + ")");
    }
    spec->set(*this, key, value);
  }
}

std::string RunConfig::to_toml() const {
  std::ostringstream out;
  std::string table;
  for (const auto& k : registry()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string t = dot == std::string::npos ? "" : name.substr(0, dot);
    if (t != table) {
      out << "\n[" << t << "]\n";
      table = t;
    }
    out << (dot == std::string::npos ? name : name.substr(dot + 1)) << " = " << k.get(*this)
        << "\n";
  }
  return out.str();
}

void RunConfig::validate() const {
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  if (n_relations < 1 || n_relations > relation_catalog().size()) {
    throw ValidationError("graph.n_relations must lie in [1, " +
                          std::to_string(relation_catalog().size()) + "]");
  }
  graph_config().validate();
  if (name_provider != "pseudoword" && name_provider != "remote") {
    throw ValidationError("names.provider must be \"pseudoword\" or \"remote\"");
  }
  if (k < 1) throw ValidationError("cluster.k must be at least 1");
  if (n_experts < 1) throw ValidationError("experts.n_experts must be at least 1");
  if (!(coverage >= 0.0 && coverage <= 1.0)) {
    throw ValidationError("experts.coverage must lie in [0, 1]");
  }
  if (misconceptions != "auto" && misconceptions != "independent" && misconceptions != "shared") {
    throw ValidationError("experts.misconceptions must be \"auto\", \"independent\" or \"shared\"");
  }
  corpus.validate();
  simulate_spec().validate();
  generalize_spec().validate();
}

Misconceptions RunConfig::effective_misconceptions() const {
  if (misconceptions == "independent") return Misconceptions::kIndependent;
  if (misconceptions == "shared") return Misconceptions::kShared;
  return setting == Setting::kSelection ? Misconceptions::kShared : Misconceptions::kIndependent;
}

ExpertOptions RunConfig::expert_options() const {
  ExpertOptions o;
  o.misconceptions = effective_misconceptions();
  o.on_uncorruptible = on_uncorruptible;
  return o;
}

ExperimentSpec RunConfig::simulate_spec() const {
  ExperimentSpec s;
  s.id = simulate_id;
  s.setting = setting;
  s.n_experts = sim_n_experts;
  s.coverage = sim_coverage;
  s.alpha = sim_alpha;
  s.temperature = sim_temperature;
  s.seeds = sim_seeds.empty() ? std::vector<std::uint64_t>{seed} : sim_seeds;
  s.learner = sim_learner;
  s.total_samples = corpus.total_samples;
  s.prior = sim_prior;
  if (misconceptions != "auto") s.misconceptions = effective_misconceptions();
  s.on_uncorruptible = on_uncorruptible;
  s.workers = workers;
  return s;
}

ExperimentSpec RunConfig::generalize_spec() const {
  ExperimentSpec s;
  s.id = "generalize";
  s.setting = Setting::kGeneralization;
  s.seeds = sim_seeds.empty() ? std::vector<std::uint64_t>{seed} : sim_seeds;
  s.kappa_comp = kappa_comp;
  s.validation_size = gen_validation_size;
  s.one_hop_scope = one_hop_scope;
  s.two_hop_cooccurrence = two_hop_cooccurrence;
  s.workers = workers;
  return s;
}

GraphGenConfig RunConfig::graph_config() const {
  GraphGenConfig g = graph;
  const auto& catalog = relation_catalog();
  g.relations.assign(catalog.begin(),
                     catalog.begin() + static_cast<std::ptrdiff_t>(
                                           std::min(n_relations, catalog.size())));
  g.seed = derive_seed(seed, "graph");
  return g;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c;
  c.apply(parse_toml(buf.str()));
  return c;
}

}  // namespace tlab
