#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "nep/hetgraph.hpp"
#include "nep/nn/layers.hpp"

namespace nep::lp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Type-suppressed symmetric adjacency. Each input edge contributes 1 to
/// A[u][v] and A[v][u]; parallel edges accumulate.
SparseMatrix homogenize(const HetGraph& graph);

/// N x |Y| label scores.
struct LabelDistribution {
  nn::Matrix scores;
  bool converged = true;
  std::size_t iterations = 0;
  /// Max row change per sweep (iterative solver only).
  std::vector<double> deltas;

  /// Row arg-max, ties to the lowest class id.
  ClassId predict(ObjectIndex v) const;
};

struct PropagationOptions {
  double alpha = 0.99;
  std::size_t max_iters = 1000;
  double tol = 1e-9;
};

/// Label propagation with hard clamping. Unlabeled rows solve their row of
/// (I + alpha L) F = Y with Y = 0, i.e. the Jacobi sweep
///
///   F_u <- alpha * sum_v A_uv F_v / (1 + alpha d_u)
///        = (alpha d_u / (1 + alpha d_u)) * (D^-1 A F)_u,
///
/// while labeled rows stay one-hot. Stops once the max row change falls
/// below `tol`.
LabelDistribution label_propagate(const SparseMatrix& adjacency, const LabelSet& labels,
                                  const PropagationOptions& options = {});

/// Dense solve of the same fixed point:
///   (I + alpha L)_UU F_U = alpha A_UL Y_L,  F_L = Y_L.
/// Intended for N <= 2000.
LabelDistribution lp_closed_form_small(const SparseMatrix& adjacency, const LabelSet& labels,
                                       double alpha);

inline constexpr std::size_t kClosedFormLimit = 2000;

}  // namespace nep::lp
