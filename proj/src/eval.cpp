#include "tlab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "tlab/error.hpp"

namespace tlab {

double direct_connection_baseline(const KnowledgeGraph& graph,
                                  std::span<const TwoHopFact> queries) {
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    for (auto i : graph.out_facts(q.head)) {
      if (graph.facts()[i].tail == q.tail) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

double two_hop_cooccurrence_baseline(std::span<const TwoHopFact> queries,
                                     std::span<const TwoHopFact> train) {
  if (queries.empty()) return 0.0;
  std::set<std::pair<EntityId, EntityId>> pairs;
  for (const auto& t : train) pairs.emplace(t.head, t.tail);
  std::size_t hits = 0;
  for (const auto& q : queries) hits += pairs.count({q.head, q.tail});
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

MajorityRelationPredictor::MajorityRelationPredictor(const KnowledgeGraph& graph)
    : graph_(&graph), tail_counts_(graph.num_relations()) {
  std::vector<std::vector<EntityId>> tails(graph.num_relations());
  for (const Fact& f : graph.facts()) tails[f.relation].push_back(f.tail);
  for (std::size_t r = 0; r < tails.size(); ++r) {
    auto& t = tails[r];
    std::sort(t.begin(), t.end());
    for (std::size_t i = 0; i < t.size();) {
      std::size_t j = i;
      while (j < t.size() && t[j] == t[i]) ++j;
      tail_counts_[r].emplace_back(t[i], j - i);
      i = j;
    }
  }
}

std::optional<EntityId> MajorityRelationPredictor::predict(RelationId r2,
                                                           const std::string& type) const {
  std::optional<EntityId> best;
  std::size_t best_count = 0;
  for (const auto& [tail, count] : tail_counts_.at(r2)) {
    if (graph_->entity(tail).type != type) continue;
    if (count > best_count) {
      best = tail;
      best_count = count;
    }
  }
  return best;
}

double majority_relation_baseline(const KnowledgeGraph& graph,
                                  std::span<const TwoHopFact> queries) {
  if (queries.empty()) return 0.0;
  const MajorityRelationPredictor predictor(graph);
  std::size_t hits = 0;
  for (const auto& q : queries) {
    const auto y = predictor.predict(q.r2, graph.entity(q.tail).type);
    if (y && *y == q.tail) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const char* kHeader = "experiment,setting,n_experts,coverage,alpha,temperature,d_size,metric,value,seed";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string report_csv(std::span<const ReportRow> rows) {
  std::ostringstream out;
  write_report_csv(out, rows);
  return out.str();
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "# report-version: " << kReportVersion << "\n" << kHeader << "\n";
  for (const auto& r : rows) {
    if (r.experiment.find(',') != std::string::npos) {
      throw ValidationError("experiment id must not contain commas");
    }
    out << r.experiment << ',' << r.setting << ',' << r.n_experts << ',' << fmt_double(r.coverage)
        << ',' << fmt_double(r.alpha) << ',' << fmt_double(r.temperature) << ',';
    if (r.d_size) out << *r.d_size;
    out << ',' << r.metric << ',' << fmt_double(r.value) << ',' << r.seed << "\n";
  }
}

std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kHeader) throw ParseError("unexpected report header", lineno, 1);
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError("expected 10 columns", lineno, 1);
    try {
      ReportRow r;
      r.experiment = f[0];
      r.setting = f[1];
      r.n_experts = std::stoull(f[2]);
      r.coverage = std::stod(f[3]);
      r.alpha = std::stod(f[4]);
      r.temperature = std::stod(f[5]);
      if (!f[6].empty()) r.d_size = std::stoull(f[6]);
      r.metric = f[7];
      r.value = std::stod(f[8]);
      r.seed = std::stoull(f[9]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("bad numeric field", lineno, 1);
    }
  }
  if (!header) throw ValidationError("report has no header");
  return rows;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ValidationError("experiment needs at least one seed");
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (setting == Setting::kGeneralization) {
    if (kappa_comp.empty()) throw ValidationError("kappa_comp grid is empty");
    return;
  }
  if (n_experts.empty() || coverage.empty() || alpha.empty() || temperature.empty()) {
    throw ValidationError("experiment grid has an empty dimension");
  }
  for (auto n : n_experts) {
    if (n < 1) throw ValidationError("n_experts must be at least 1");
  }
  for (double c : coverage) {
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("coverage must lie in [0, 1]");
    if (setting == Setting::kSelection && c == 0.0) {
      throw ValidationError("selection coverage must be positive");
    }
  }
  for (double a : alpha) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  }
  for (double t : temperature) {
    if (!(t >= 0.0)) throw ValidationError("temperature must be non-negative");
  }
}

Misconceptions ExperimentSpec::effective_misconceptions() const {
  if (misconceptions) return *misconceptions;
  return setting == Setting::kSelection ? Misconceptions::kShared : Misconceptions::kIndependent;
}

GeneralizationRun run_generalization(const KnowledgeGraph& graph, const EdgePartition& partition,
                                     std::size_t validation_size, std::size_t kappa_comp,
                                     std::uint64_t seed, OneHopScope scope) {
  const auto violations = functional_check(graph);
  if (!violations.empty()) throw ValidationError("generalization requires a functional graph");
  GeneralizationRun run;
  run.sets = split_two_hops(graph, partition, validation_size, derive_seed(seed, "two_hop"));
  std::vector<TwoHopExample> d;
  d.reserve(run.sets.train_within.size());
  for (const auto& t : run.sets.train_within) {
    d.push_back(to_example(t, partition.assignment[*graph.fact_index({t.head, t.r1, t.bridge})]));
  }
  Hypothesis mem = fit_memorizer(d);
  Hypothesis comp = fit_compositional(graph, d, kappa_comp, scope);
  run.hypothesis = erm_select(mem, comp);

  auto& o = run.outcome;
  o.condition = sufficient_condition(graph, partition, kappa_comp);
  o.selected = run.hypothesis.kind;
  o.d_size = d.size();
  o.t1_size = comp.one_hop_table.size();
  o.f1_size = graph.num_facts();
  o.acc_within_val = evaluate_two_hop(run.hypothesis, run.sets.validation_within);
  o.acc_across = evaluate_two_hop(run.hypothesis, run.sets.test_across);
  run.direct_val = direct_connection_baseline(graph, run.sets.validation_within);
  run.direct_across = direct_connection_baseline(graph, run.sets.test_across);
  run.majority_val = majority_relation_baseline(graph, run.sets.validation_within);
  run.majority_across = majority_relation_baseline(graph, run.sets.test_across);
  run.cooccurrence_across =
      two_hop_cooccurrence_baseline(run.sets.test_across, run.sets.train_within);
  return run;
}

namespace {

// Re-throws the active exception with a cell prefix, keeping its category.
[[noreturn]] void rethrow_in_cell(const std::string& cell) {
  try {
    throw;
  } catch (const RuntimeError& e) {
    throw RuntimeError(cell + ": " + e.what());
  } catch (const std::exception& e) {
    throw ValidationError(cell + ": " + e.what());
  }
}

// Runs job(i) for i in [0, n) on up to `workers` threads.
template <typename Job>
void parallel_for(std::size_t n, std::size_t workers, Job job) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<ReportRow> run_mixture_cell(const KnowledgeGraph& graph,
                                        const EdgePartition* partition,
                                        const ExperimentSpec& spec, std::uint64_t seed,
                                        std::size_t n_e, double c) {
  ExpertOptions options;
  options.misconceptions = spec.effective_misconceptions();
  options.on_uncorruptible = spec.on_uncorruptible;
  const std::uint64_t expert_master = derive_seed(seed, "experts");
  std::vector<ExpertProfile> experts =
      spec.setting == Setting::kSelection
          ? build_selection_experts(graph, *partition, n_e, c, expert_master, options)
          : build_denoising_experts(graph, n_e, c, expert_master, options);
  const RewardSpec reward = RewardSpec::uniform_over_facts(graph);

  std::vector<ReportRow> rows;
  for (double a : spec.alpha) {
    CorpusConfig cc;
    cc.total_samples = spec.total_samples;
    cc.alpha = a;
    cc.seed = derive_seed(seed, "corpus");
    const MixtureModel exact = exact_mixture(experts, cc, spec.prior);
    MixtureModel empirical;
    if (spec.learner == MixtureKind::kEmpirical) {
      const Corpus corpus = generate_corpus(graph, experts, cc);
      empirical = fit_empirical(graph, corpus.samples);
    }
    const MixtureModel& learner = spec.learner == MixtureKind::kExact ? exact : empirical;
    double max_expert = 0.0;
    for (const auto& comp : exact.components) {
      max_expert = std::max(max_expert, component_reward(graph, comp, reward));
    }
    for (double t : spec.temperature) {
      const double acc = query_accuracy(learner, graph, t, derive_seed(seed, "eval"));
      auto row = [&](const std::string& metric, double value) {
        rows.push_back({spec.id, to_string(spec.setting), n_e, c, a, t, std::nullopt, metric,
                        value, seed});
      };
      row("accuracy", acc);
      row("max_expert_reward", max_expert);
      row("transcends", acc > max_expert ? 1.0 : 0.0);
    }
  }
  return rows;
}

}  // namespace

std::vector<ReportRow> run_experiment(const KnowledgeGraph& graph, const EdgePartition* partition,
                                      const ExperimentSpec& spec) {
  spec.validate();
  if (spec.setting != Setting::kDenoising && partition == nullptr) {
    throw ValidationError(to_string(spec.setting) + " experiments need a partition");
  }
  if (partition != nullptr) partition->validate(graph);

  std::vector<ReportRow> rows;
  if (spec.setting == Setting::kGeneralization) {
    const std::size_t n = spec.seeds.size() * spec.kappa_comp.size();
    std::vector<std::vector<ReportRow>> cells(n);
    parallel_for(n, spec.workers, [&](std::size_t i) {
      const std::uint64_t seed = spec.seeds[i / spec.kappa_comp.size()];
      const std::size_t kappa = spec.kappa_comp[i % spec.kappa_comp.size()];
      try {
        const auto run = run_generalization(graph, *partition, spec.validation_size, kappa, seed,
                                            spec.one_hop_scope);
        auto row = [&](const std::string& metric, double value) {
          cells[i].push_back({spec.id, to_string(spec.setting), partition->non_empty(), 1.0, 0.0,
                              0.0, run.outcome.d_size, metric, value, seed});
        };
        row("acc_within_val", run.outcome.acc_within_val);
        row("acc_across", run.outcome.acc_across);
        row("direct_connection", run.direct_across);
        row("majority_relation", run.majority_across);
        if (spec.two_hop_cooccurrence) row("two_hop_cooccurrence", run.cooccurrence_across);
        row("condition_holds", run.outcome.condition.holds ? 1.0 : 0.0);
        row("kind_compositional",
            run.outcome.selected == HypothesisKind::kCompositional ? 1.0 : 0.0);
        row("kappa_comp", static_cast<double>(kappa));
      } catch (...) {
        rethrow_in_cell("cell (seed=" + std::to_string(seed) +
                        ", kappa_comp=" + std::to_string(kappa) + ")");
      }
    });
    for (auto& c : cells) rows.insert(rows.end(), c.begin(), c.end());
    return rows;
  }

  const std::size_t nn = spec.n_experts.size();
  const std::size_t nc = spec.coverage.size();
  const std::size_t n = spec.seeds.size() * nn * nc;
  std::vector<std::vector<ReportRow>> cells(n);
  parallel_for(n, spec.workers, [&](std::size_t i) {
    const std::uint64_t seed = spec.seeds[i / (nn * nc)];
    const std::size_t n_e = spec.n_experts[(i / nc) % nn];
    const double c = spec.coverage[i % nc];
    try {
      cells[i] = run_mixture_cell(graph, partition, spec, seed, n_e, c);
    } catch (...) {
      rethrow_in_cell("cell (seed=" + std::to_string(seed) + ", n_experts=" +
                      std::to_string(n_e) + ", coverage=" + fmt_double(c) + ")");
    }
  });
  for (auto& c : cells) rows.insert(rows.end(), c.begin(), c.end());
  return rows;
}

}  // namespace tlab
