#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/corpus.hpp"
#include "tlab/eval.hpp"
#include "tlab/experts.hpp"
#include "tlab/graph_gen.hpp"

namespace tlab {

// Subset of TOML: [table] and [table.sub] headers, bare or dotted keys,
// strings (basic escapes), integers, floats, booleans and single-line
// arrays of those. Comments start with '#'.
struct TomlValue {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool b = false;
  std::int64_t i = 0;
  double d = 0.0;
  std::string s;
  std::vector<TomlValue> array;
  std::size_t line = 0;
};

// Keys are fully qualified ("corpus.alpha"). Throws ParseError.
std::map<std::string, TomlValue> parse_toml(std::string_view text);

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::size_t workers = 1;

  std::string graph_preset = "desk";
  GraphGenConfig graph = GraphGenConfig::desk();
  std::size_t n_relations = 20;

  std::string name_provider = "pseudoword";  // pseudoword | remote
  std::string name_host = "127.0.0.1";
  int name_port = 8080;
  std::string name_path = "/v1/name";
  std::size_t name_max_redraws = 16;

  std::size_t k = 50;
  ClusterOptions cluster;

  Setting setting = Setting::kDenoising;
  std::size_t n_experts = 100;
  double coverage = 0.2;
  std::string misconceptions = "auto";  // auto | independent | shared
  OnUncorruptible on_uncorruptible = OnUncorruptible::kError;

  CorpusConfig corpus;

  // simulate: grid over the experts.setting.
  std::string simulate_id = "simulate";
  std::vector<std::size_t> sim_n_experts = {1, 10, 100};
  std::vector<double> sim_coverage = {0.2, 0.5, 0.8};
  std::vector<double> sim_alpha = {0.0};
  std::vector<double> sim_temperature = {0.0, 1.0};
  // Replicate seeds; empty means the master seed alone.
  std::vector<std::uint64_t> sim_seeds;
  MixtureKind sim_learner = MixtureKind::kExact;
  ExpertPrior sim_prior = ExpertPrior::kQuota;

  std::vector<std::size_t> kappa_comp = {64};
  std::size_t gen_validation_size = 0;
  OneHopScope one_hop_scope = OneHopScope::kIncident;
  bool two_hop_cooccurrence = false;

  // Applies a parsed document; unknown keys and type mismatches throw
  // ValidationError naming the key. graph.preset is applied first.
  void apply(const std::map<std::string, TomlValue>& doc);
  // Every key with its effective value, loadable by apply().
  std::string to_toml() const;
  void validate() const;

  Misconceptions effective_misconceptions() const;
  ExpertOptions expert_options() const;
  ExperimentSpec simulate_spec() const;
  ExperimentSpec generalize_spec() const;
  GraphGenConfig graph_config() const;
};

RunConfig load_run_config(const std::string& path);

}  // namespace tlab
