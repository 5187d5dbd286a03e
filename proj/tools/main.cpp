// tlab command-line entry point.
//
// Precedence: built-in defaults < --config file < --set key=value < the
// dedicated flags (--seed, --out, --workers, --k, --setting). Upstream
// artifacts (graph.json, partition.json, experts.json) are read from the
// output directory when present and otherwise rebuilt from the config, so
// every subcommand is a function of (config, seed).

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "tlab/clustering.hpp"
#include "tlab/config.hpp"
#include "tlab/corpus.hpp"
#include "tlab/error.hpp"
#include "tlab/eval.hpp"
#include "tlab/experts.hpp"
#include "tlab/gen_learner.hpp"
#include "tlab/graph_gen.hpp"
#include "tlab/kg.hpp"
#include "tlab/mixture.hpp"
#include "tlab/names.hpp"
#include "tlab/rng.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> k;
  std::optional<std::string> setting;
  bool error_json = false;
};

// Holds out/.tlab.lock for the lifetime of a subcommand.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".tlab.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw RuntimeError("output directory is locked by another run: " + path_.string());
      }
      throw RuntimeError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) {
      // Non-fatal: the lock's existence is what matters.
    }
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + tmp.string());
    out << bytes;
    if (!out) throw RuntimeError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

template <typename F>
void write_with(const fs::path& p, F&& fill) {
  std::ostringstream out;
  fill(out);
  write_file(p, out.str());
}

class Context {
 public:
  Context(RunConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.out_dir) {}

  const RunConfig& cfg() const { return cfg_; }
  const fs::path& out() const { return out_; }

  void echo_config() const { write_file(out_ / "effective_config.toml", cfg_.to_toml()); }

  const KnowledgeGraph& graph() {
    if (!graph_) {
      const fs::path p = out_ / "graph.json";
      graph_ = fs::exists(p) ? deserialize(read_file(p)) : build_graph();
    }
    return *graph_;
  }

  KnowledgeGraph build_graph() const {
    KnowledgeGraph g = generate_graph(cfg_.graph_config());
    if (cfg_.name_provider == "remote") {
      RemoteNameProvider provider(
          RemoteProviderConfig::from_env(cfg_.name_host, cfg_.name_port, cfg_.name_path));
      RenameOptions ro;
      ro.seed = derive_seed(cfg_.seed, "rename");
      ro.max_redraws = static_cast<std::uint32_t>(cfg_.name_max_redraws);
      g = rename_entities(g, provider, ro);
    }
    return g;
  }

  const EdgePartition& partition() {
    if (!partition_) {
      const fs::path p = out_ / "partition.json";
      if (fs::exists(p)) {
        partition_ = partition_from_json(read_file(p));
        partition_->validate(graph());
      } else {
        partition_ = build_partition();
      }
    }
    return *partition_;
  }

  EdgePartition build_partition() {
    ClusterOptions o = cfg_.cluster;
    o.workers = static_cast<unsigned>(cfg_.workers);
    return cluster_edges(graph(), cfg_.k, derive_seed(cfg_.seed, "cluster"), o);
  }

  const std::vector<ExpertProfile>& experts() {
    if (!experts_) {
      const fs::path p = out_ / "experts.json";
      if (fs::exists(p)) {
        // The file's own setting decides whether cluster ids are needed.
        const std::string text = read_file(p);
        const auto doc = nlohmann::json::parse(text, nullptr, false);
        bool clustered = false;
        if (doc.is_array()) {
          for (const auto& e : doc) {
            clustered = clustered || (e.is_object() && e.value("setting", "") != "denoising");
          }
        }
        experts_ = experts_from_json(text, clustered ? &partition() : nullptr);
      } else {
        experts_ = build_experts();
      }
    }
    return *experts_;
  }

  std::vector<ExpertProfile> build_experts() {
    const std::uint64_t s = derive_seed(cfg_.seed, "experts");
    switch (cfg_.setting) {
      case Setting::kDenoising:
        return build_denoising_experts(graph(), cfg_.n_experts, cfg_.coverage, s,
                                       cfg_.expert_options());
      case Setting::kSelection:
        return build_selection_experts(graph(), partition(), cfg_.n_experts, cfg_.coverage, s,
                                       cfg_.expert_options());
      case Setting::kGeneralization:
        return build_generalization_experts(graph(), partition());
    }
    throw ValidationError("unknown setting");
  }

  CorpusConfig corpus_config() const {
    CorpusConfig c = cfg_.corpus;
    c.seed = derive_seed(cfg_.seed, "corpus");
    c.workers = cfg_.workers;
    return c;
  }

 private:
  RunConfig cfg_;
  fs::path out_;
  std::optional<KnowledgeGraph> graph_;
  std::optional<EdgePartition> partition_;
  std::optional<std::vector<ExpertProfile>> experts_;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_run_config(o.config_path);
  if (!o.sets.empty()) {
    std::string text;
    for (const auto& s : o.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
      text += s.substr(0, eq) + " = " + s.substr(eq + 1) + "\n";
    }
    cfg.apply(parse_toml(text));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.k) cfg.k = *o.k;
  if (o.setting) cfg.setting = parse_setting(*o.setting);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

void cmd_gen_graph(Context& ctx) {
  write_file(ctx.out() / "graph.json", serialize(ctx.build_graph()));
}

void cmd_cluster(Context& ctx) {
  write_file(ctx.out() / "partition.json", partition_to_json(ctx.build_partition()));
}

void cmd_make_experts(Context& ctx) {
  write_file(ctx.out() / "experts.json", experts_to_json(ctx.build_experts()));
}

void cmd_gen_corpus(Context& ctx) {
  const CorpusConfig cc = ctx.corpus_config();
  const bool needs_partition = cc.two_hop.include || ctx.cfg().setting != Setting::kDenoising;
  const EdgePartition* part = needs_partition ? &ctx.partition() : nullptr;
  const Corpus corpus = generate_corpus(ctx.graph(), ctx.experts(), cc, part);
  write_with(ctx.out() / "corpus.jsonl",
             [&](std::ostream& out) { write_jsonl(out, corpus.samples); });
  if (cc.two_hop.include) {
    const auto manifest =
        two_hop_manifest(ctx.graph(), corpus.two_hops, *part, ctx.experts(), cc.two_hop.format);
    std::vector<Sample> val;
    std::vector<Sample> test;
    for (const auto& s : manifest) (s.split == Split::kValidation ? val : test).push_back(s);
    write_with(ctx.out() / "two_hop_validation.jsonl",
               [&](std::ostream& out) { write_jsonl(out, val); });
    write_with(ctx.out() / "two_hop_test.jsonl",
               [&](std::ostream& out) { write_jsonl(out, test); });
  }
  if (corpus.fallbacks > 0) {
    std::fprintf(stderr, "warning: %zu samples kept level-2 text after rephrasing failed\n",
                 corpus.fallbacks);
  }
}

void cmd_simulate(Context& ctx) {
  const ExperimentSpec spec = ctx.cfg().simulate_spec();
  const EdgePartition* part = spec.setting == Setting::kDenoising ? nullptr : &ctx.partition();
  const auto rows = run_experiment(ctx.graph(), part, spec);
  write_file(ctx.out() / "report.csv", report_csv(rows));
}

void cmd_generalize(Context& ctx) {
  const auto& g = ctx.graph();
  const auto& p = ctx.partition();
  const ExperimentSpec spec = ctx.cfg().generalize_spec();
  const auto rows = run_experiment(g, &p, spec);
  write_file(ctx.out() / "generalize.csv", report_csv(rows));

  std::string condition = condition_csv_header();
  std::optional<Hypothesis> first;
  for (std::uint64_t seed : spec.seeds) {
    for (std::size_t kappa : spec.kappa_comp) {
      auto run = run_generalization(g, p, spec.validation_size, kappa, seed, spec.one_hop_scope);
      condition += condition_csv_row(run.outcome);
      if (!first) first = std::move(run.hypothesis);
    }
  }
  write_file(ctx.out() / "condition.csv", condition);
  write_file(ctx.out() / "hypothesis.json", hypothesis_to_json(*first));
}

void cmd_baselines(Context& ctx) {
  const auto& g = ctx.graph();
  const auto& p = ctx.partition();
  const RunConfig& cfg = ctx.cfg();
  const auto sets =
      split_two_hops(g, p, cfg.gen_validation_size, derive_seed(cfg.seed, "two_hop_split"));
  std::vector<ReportRow> rows;
  auto add = [&](const std::string& setting, const std::string& metric, double v) {
    ReportRow r;
    r.experiment = "baselines";
    r.setting = setting;
    r.metric = metric;
    r.value = v;
    r.seed = cfg.seed;
    rows.push_back(r);
  };
  add("validation_within", "direct_connection", direct_connection_baseline(g, sets.validation_within));
  add("validation_within", "majority_relation", majority_relation_baseline(g, sets.validation_within));
  add("test_across", "direct_connection", direct_connection_baseline(g, sets.test_across));
  add("test_across", "majority_relation", majority_relation_baseline(g, sets.test_across));
  if (cfg.two_hop_cooccurrence) {
    add("test_across", "two_hop_cooccurrence",
        two_hop_cooccurrence_baseline(sets.test_across, sets.train_within));
  }
  write_file(ctx.out() / "baselines.csv", report_csv(rows));
}

// Figure-analog sweeps on the desk graph plus one pass/fail row per
// acceptance criterion.
void cmd_verify(Context& ctx) {
  std::vector<ReportRow> rows;
  int failed = 0;
  for (const auto& c : acceptance::criteria()) {
    const auto r = acceptance::run_criterion(c);
    std::printf("%s\n", acceptance::format_result(r).c_str());
    std::fflush(stdout);
    failed += r.passed ? 0 : 1;
    ReportRow row;
    row.experiment = "verify";
    row.setting = "criterion_" + std::to_string(r.id);
    row.metric = "passed";
    row.value = r.passed ? 1.0 : 0.0;
    rows.push_back(row);
  }

  const std::size_t workers = ctx.cfg().workers;
  const KnowledgeGraph desk = generate_graph(GraphGenConfig::desk(1));
  auto append = [&](const std::vector<ReportRow>& more) {
    rows.insert(rows.end(), more.begin(), more.end());
  };

  ExperimentSpec coverage_sweep;
  coverage_sweep.id = "fig3_coverage";
  coverage_sweep.setting = Setting::kDenoising;
  coverage_sweep.n_experts = {1, 10, 100};
  coverage_sweep.coverage = {0.1, 0.2, 0.3, 0.4, 0.5};
  coverage_sweep.temperature = {0.0};
  coverage_sweep.workers = workers;
  append(run_experiment(desk, nullptr, coverage_sweep));

  ExperimentSpec temp_sweep = coverage_sweep;
  temp_sweep.id = "fig4_temperature";
  temp_sweep.n_experts = {100};
  temp_sweep.temperature = {0.0, 0.25, 0.5, 0.75, 1.0};
  append(run_experiment(desk, nullptr, temp_sweep));

  const EdgePartition part = cluster_edges(desk, 50, derive_seed(1, "cluster"));
  ExperimentSpec alpha_sweep;
  alpha_sweep.id = "fig5_alpha";
  alpha_sweep.setting = Setting::kSelection;
  alpha_sweep.n_experts = {10, 100};
  alpha_sweep.coverage = {0.1};
  alpha_sweep.alpha = {0.8, 0.9, 0.95, 1.0};
  alpha_sweep.workers = workers;
  append(run_experiment(desk, &part, alpha_sweep));

  ExperimentSpec two_hop;
  two_hop.id = "fig6_twohop";
  two_hop.setting = Setting::kGeneralization;
  two_hop.kappa_comp = {24};
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto gadget = acceptance::hub_gadget(3, n);
    append(run_experiment(gadget.graph, &gadget.partition, two_hop));
  }

  write_file(ctx.out() / "verify_report.csv", report_csv(rows));
  if (failed > 0) {
    throw RuntimeError(std::to_string(failed) + " acceptance criteria failed");
  }
}

int report_error(const Options& o, const std::string& category, const std::string& message,
                 int code) {
  if (o.error_json) {
    nlohmann::ordered_json j;
    j["error"] = category;
    j["message"] = message;
    j["exit_code"] = code;
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error: " << message << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Synthetic knowledge-graph pipelines for studying transcendence"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", o.sets, "Override a config key (key=value); repeatable");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--workers", o.workers, "Worker threads");
  app.add_flag("--error-json", o.error_json, "Print errors as JSON on stderr");

  struct Sub {
    const char* name;
    const char* help;
    void (*run)(Context&);
  };
  const std::vector<Sub> subs = {
      {"gen-graph", "Generate the knowledge graph (graph.json)", cmd_gen_graph},
      {"cluster", "Partition facts into clusters (partition.json)", cmd_cluster},
      {"make-experts", "Build the expert set (experts.json)", cmd_make_experts},
      {"gen-corpus", "Emit the training corpus (corpus.jsonl, two-hop manifests)", cmd_gen_corpus},
      {"simulate", "Run mixture sweeps (report.csv)", cmd_simulate},
      {"generalize", "Run the two-hop learner (condition.csv, generalize.csv, hypothesis.json)",
       cmd_generalize},
      {"baselines", "Score two-hop baselines (baselines.csv)", cmd_baselines},
      {"verify", "Run the acceptance suite and figure sweeps (verify_report.csv)", cmd_verify},
  };
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "cluster") sub->add_option("--k", o.k, "Number of clusters");
    if (std::string(s.name) == "make-experts") {
      sub->add_option("--setting", o.setting, "denoising | selection | generalization")
          ->check(CLI::IsMember({"denoising", "selection", "generalization"}));
    }
    handles.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(o, "usage", e.what(), 1);
  }

  try {
    RunConfig cfg = resolve_config(o);
    fs::create_directories(cfg.out_dir);
    DirLock lock(cfg.out_dir);
    Context ctx(std::move(cfg));
    ctx.echo_config();
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (handles[i]->parsed()) subs[i].run(ctx);
    }
  } catch (const ValidationError& e) {
    return report_error(o, "validation", e.what(), 1);
  } catch (const RuntimeError& e) {
    return report_error(o, "runtime", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return report_error(o, "runtime", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error(o, "runtime", e.what(), 2);
  }
  return 0;
}
