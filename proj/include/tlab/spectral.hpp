#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tlab/kg.hpp"

namespace tlab::spectral {

// Symmetric sparse matrix in CSR form.
struct SparseSymmetric {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> columns;
  std::vector<double> values;

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd to_dense() const;
  // Gershgorin bound on the spectral radius.
  double gershgorin_bound() const;
};

// Unnormalized Laplacian L = D - A of the symmetrized multigraph restricted
// to `nodes` (row i corresponds to nodes[i]). A(u, v) counts facts joining u
// and v in either direction.
SparseSymmetric laplacian(const KnowledgeGraph& graph, const std::vector<EntityId>& nodes);

struct EigenResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // one column per value
  std::size_t iterations = 0;
};

EigenResult smallest_eigenpairs_dense(const Eigen::MatrixXd& matrix, std::size_t k);

struct IterativeOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 5000;  // operator applications
  std::size_t subspace = 0;           // 0 picks max(2k + 20, 40)
  std::uint64_t seed = 0;
};

// Thick-restart Lanczos with full reorthogonalization on sigma*I - L.
// Throws RuntimeError with residual diagnostics on non-convergence.
EigenResult smallest_eigenpairs_lanczos(const SparseSymmetric& matrix, std::size_t k,
                                        const IterativeOptions& options = {});

struct KMeansOptions {
  std::size_t k = 2;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct KMeansResult {
  std::vector<std::uint32_t> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  // Inertia after every completed iteration of the selected restart.
  std::vector<double> inertia_history;
  std::size_t restart = 0;
};

// Rows of `points` are observations. k-means++ seeding; a point moves only to
// a strictly closer centroid (initial ties go to the lowest index). Empty
// clusters take the farthest point of the largest cluster. The returned
// restart is the argmin inertia with the lowest restart index.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

}  // namespace tlab::spectral
