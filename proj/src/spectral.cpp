#include "tlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab::spectral {

Eigen::VectorXd SparseSymmetric::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) acc += values[p] * x[columns[p]];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
  return y;
}

Eigen::MatrixXd SparseSymmetric::to_dense() const {
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
      m(static_cast<Eigen::Index>(i), columns[p]) = values[p];
    }
  }
  return m;
}

double SparseSymmetric::gershgorin_bound() const {
  double bound = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) row += std::abs(values[p]);
    bound = std::max(bound, row);
  }
  return bound;
}

SparseSymmetric laplacian(const KnowledgeGraph& graph, const std::vector<EntityId>& nodes) {
  std::vector<std::int64_t> local(graph.num_entities(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<std::int64_t>(i);

  std::vector<std::map<std::uint32_t, double>> rows(nodes.size());
  for (const Fact& f : graph.facts()) {
    const auto a = local[f.head];
    const auto b = local[f.tail];
    if (a < 0 || b < 0) continue;
    rows[a][static_cast<std::uint32_t>(b)] -= 1.0;
    rows[b][static_cast<std::uint32_t>(a)] -= 1.0;
    rows[a][static_cast<std::uint32_t>(a)] += 1.0;
    rows[b][static_cast<std::uint32_t>(b)] += 1.0;
  }
  SparseSymmetric m;
  m.n = nodes.size();
  m.offsets.push_back(0);
  for (const auto& row : rows) {
    for (const auto& [col, val] : row) {
      m.columns.push_back(col);
      m.values.push_back(val);
    }
    m.offsets.push_back(m.columns.size());
  }
  return m;
}

EigenResult smallest_eigenpairs_dense(const Eigen::MatrixXd& matrix, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
  if (solver.info() != Eigen::Success) throw RuntimeError("dense eigensolver failed");
  const auto kk = static_cast<Eigen::Index>(std::min<std::size_t>(k, matrix.rows()));
  EigenResult r;
  r.values = solver.eigenvalues().head(kk);
  r.vectors = solver.eigenvectors().leftCols(kk);
  r.iterations = 1;
  return r;
}

EigenResult smallest_eigenpairs_lanczos(const SparseSymmetric& matrix, std::size_t k,
                                        const IterativeOptions& options) {
  const auto n = static_cast<Eigen::Index>(matrix.n);
  if (k == 0 || static_cast<Eigen::Index>(k) > n) {
    throw ValidationError("eigenpair count " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  }
  const double sigma = std::max(matrix.gershgorin_bound(), 1e-12);
  auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return sigma * x - matrix.multiply(x);
  };

  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::Index m = options.subspace > 0 ? static_cast<Eigen::Index>(options.subspace)
                                        : std::max<Eigen::Index>(2 * kk + 20, 40);
  m = std::min(m, n);
  const Eigen::Index keep = std::min(m - 1, kk + (m - kk) / 2);

  Eigen::MatrixXd basis(n, m);
  Eigen::MatrixXd image(n, m);
  Eigen::Index cols = 0;
  std::size_t applications = 0;
  Rng rng(derive_seed(options.seed, "lanczos"));

  auto random_vector = [&]() {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform() - 0.5;
    return v;
  };
  auto orthogonalize = [&](Eigen::VectorXd& v) {
    for (int pass = 0; pass < 2; ++pass) {
      if (cols > 0) v -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * v);
    }
  };
  auto append = [&](Eigen::VectorXd v) {
    basis.col(cols) = v;
    image.col(cols) = apply(v);
    ++applications;
    ++cols;
  };

  {
    Eigen::VectorXd v = random_vector();
    append(v / v.norm());
  }

  double worst_residual = std::numeric_limits<double>::infinity();
  while (true) {
    while (cols < m) {
      Eigen::VectorXd r = image.col(cols - 1);
      orthogonalize(r);
      double norm = r.norm();
      if (norm < 1e-10 * sigma) {
        // Invariant subspace found; continue with a fresh direction.
        r = random_vector();
        orthogonalize(r);
        norm = r.norm();
      }
      append(r / norm);
    }

    Eigen::MatrixXd projected = basis.leftCols(cols).transpose() * image.leftCols(cols);
    projected = 0.5 * (projected + projected.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(projected);
    // Largest eigenvalues of sigma*I - L sit at the end (ascending order).
    const Eigen::MatrixXd ritz = small.eigenvectors().rightCols(keep).rowwise().reverse();
    const Eigen::VectorXd theta = small.eigenvalues().tail(keep).reverse();

    const Eigen::MatrixXd x = basis.leftCols(cols) * ritz;
    const Eigen::MatrixXd bx = image.leftCols(cols) * ritz;
    worst_residual = 0.0;
    for (Eigen::Index i = 0; i < kk; ++i) {
      const double res = (bx.col(i) - theta[i] * x.col(i)).norm();
      worst_residual = std::max(worst_residual, res);
    }
    if (worst_residual <= options.tolerance * sigma) {
      EigenResult out;
      out.values.resize(kk);
      out.vectors.resize(n, kk);
      for (Eigen::Index i = 0; i < kk; ++i) {
        out.values[i] = sigma - theta[i];
        out.vectors.col(i) = x.col(i).normalized();
      }
      out.iterations = applications;
      return out;
    }
    if (applications >= options.max_iterations || m == n) {
      if (m == n) {
        // Full space: the Rayleigh-Ritz values are exact up to rounding.
        EigenResult out;
        out.values.resize(kk);
        out.vectors.resize(n, kk);
        for (Eigen::Index i = 0; i < kk; ++i) {
          out.values[i] = sigma - theta[i];
          out.vectors.col(i) = x.col(i).normalized();
        }
        out.iterations = applications;
        return out;
      }
      throw RuntimeError("Lanczos eigensolver did not converge: " +
                         std::to_string(applications) + " operator applications, worst residual " +
                         std::to_string(worst_residual) + " > tolerance " +
                         std::to_string(options.tolerance * sigma));
    }

    // Thick restart: keep the best Ritz vectors and their images.
    basis.leftCols(keep) = x;
    image.leftCols(keep) = bx;
    cols = keep;
  }
}

namespace {

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index row,
                        const Eigen::MatrixXd& centroids, Eigen::Index c) {
  return (points.row(row) - centroids.row(c)).squaredNorm();
}

struct Run {
  std::vector<std::uint32_t> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> history;
};

void update_centroids(const Eigen::MatrixXd& points, const std::vector<std::uint32_t>& labels,
                      Eigen::MatrixXd& centroids) {
  const Eigen::Index k = centroids.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(labels[i]) += points.row(i);
    ++counts[labels[i]];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }
}

double inertia_of(const Eigen::MatrixXd& points, const std::vector<std::uint32_t>& labels,
                  const Eigen::MatrixXd& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += squared_distance(points, i, centroids, labels[i]);
  }
  return total;
}

// Returns true if any cluster was repaired.
bool repair_empty(const Eigen::MatrixXd& points, std::vector<std::uint32_t>& labels,
                  Eigen::MatrixXd& centroids) {
  const Eigen::Index k = centroids.rows();
  bool repaired = false;
  while (true) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (auto l : labels) ++counts[l];
    auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) return repaired;
    const auto target = static_cast<std::uint32_t>(empty - counts.begin());
    const auto largest = static_cast<std::uint32_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (counts[largest] < 2) return repaired;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (labels[i] != largest) continue;
      const double d = squared_distance(points, i, centroids, largest);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[far] = target;
    centroids.row(target) = points.row(far);
    update_centroids(points, labels, centroids);
    repaired = true;
  }
}

Run single_run(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iterations,
               std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  Rng rng(seed);
  Run run;
  run.centroids.resize(kk, points.cols());

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
  run.centroids.row(0) = points.row(first);
  chosen[first] = 1;
  for (Eigen::Index c = 1; c < kk; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points, i, run.centroids, c - 1));
      total += d2[i];
    }
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > u) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = 1;
    run.centroids.row(c) = points.row(pick);
  }

  run.labels.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < kk; ++c) {
      const double d = squared_distance(points, i, run.centroids, c);
      if (d < best) {
        best = d;
        run.labels[i] = static_cast<std::uint32_t>(c);
      }
    }
  }
  update_centroids(points, run.labels, run.centroids);
  repair_empty(points, run.labels, run.centroids);
  run.inertia = inertia_of(points, run.labels, run.centroids);
  run.history.push_back(run.inertia);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto current = static_cast<Eigen::Index>(run.labels[i]);
      double best = squared_distance(points, i, run.centroids, current);
      Eigen::Index best_c = current;
      for (Eigen::Index c = 0; c < kk; ++c) {
        const double d = squared_distance(points, i, run.centroids, c);
        if (d < best * (1.0 - 1e-12) - 1e-300) {
          best = d;
          best_c = c;
        }
      }
      if (best_c != current) {
        run.labels[i] = static_cast<std::uint32_t>(best_c);
        changed = true;
      }
    }
    if (!changed) break;
    update_centroids(points, run.labels, run.centroids);
    repair_empty(points, run.labels, run.centroids);
    const double next = inertia_of(points, run.labels, run.centroids);
    if (!(next < run.inertia)) break;  // numerically stalled
    run.inertia = next;
    run.history.push_back(next);
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
  if (options.k == 0 || static_cast<Eigen::Index>(options.k) > points.rows()) {
    throw ValidationError("k-means: k=" + std::to_string(options.k) + " outside [1, " +
                          std::to_string(points.rows()) + "]");
  }
  const std::size_t restarts = std::clamp<std::size_t>(options.restarts, 1, 50);
  std::vector<Run> runs(restarts);
  auto work = [&](std::size_t r) {
    runs[r] = single_run(points, options.k, options.max_iterations,
                         derive_seed(options.seed, "kmeans", r));
  };
  const unsigned workers = std::max(1u, options.workers);
  if (workers == 1) {
    for (std::size_t r = 0; r < restarts; ++r) work(r);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t r = w; r < restarts; r += workers) work(r);
      });
    }
    for (auto& t : threads) t.join();
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  KMeansResult out;
  out.labels = std::move(runs[best].labels);
  out.centroids = std::move(runs[best].centroids);
  out.inertia = runs[best].inertia;
  out.inertia_history = std::move(runs[best].history);
  out.restart = best;
  return out;
}

}  // namespace tlab::spectral
