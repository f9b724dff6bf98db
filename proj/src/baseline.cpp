#include "nep/baseline.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "nep/error.hpp"

namespace nep::lp {

SparseMatrix homogenize(const HetGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.num_objects());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(graph.num_adjacency_entries());
  for (ObjectIndex u = 0; u < graph.num_objects(); ++u)
    for (const auto& nb : graph.neighbors(u))
      triplets.emplace_back(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(nb.object), 1.0);
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());  // duplicates summed
  return a;
}

ClassId LabelDistribution::predict(ObjectIndex v) const {
  const auto row = scores.row(static_cast<Eigen::Index>(v));
  return static_cast<ClassId>(
      nn::argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
}

namespace {

void check_inputs(const SparseMatrix& a, const LabelSet& labels, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  if (a.rows() != a.cols()) throw Error(ErrorCode::kDimensionMismatch, "adjacency must be square");
  if (labels.num_classes() == 0) throw Error(ErrorCode::kEmptyLabels, "no classes");
  for (const auto v : labels.objects())
    if (static_cast<Eigen::Index>(v) >= a.rows())
      throw Error(ErrorCode::kOutOfRange, "labeled object outside the adjacency");
}

nn::Matrix one_hot(const SparseMatrix& a, const LabelSet& labels) {
  nn::Matrix y = nn::Matrix::Zero(a.rows(), static_cast<Eigen::Index>(labels.num_classes()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    y(static_cast<Eigen::Index>(labels.objects()[i]), labels.classes()[i]) = 1.0;
  return y;
}

}  // namespace

LabelDistribution label_propagate(const SparseMatrix& a, const LabelSet& labels,
                                  const PropagationOptions& options) {
  check_inputs(a, labels, options.alpha);
  const auto n = a.rows();
  const double alpha = options.alpha;

  std::vector<char> clamped(static_cast<std::size_t>(n), 0);
  for (const auto v : labels.objects()) clamped[v] = 1;
  Eigen::VectorXd degree(n);
  for (Eigen::Index u = 0; u < n; ++u) degree(u) = a.row(u).sum();

  LabelDistribution out;
  out.scores = one_hot(a, labels);
  out.converged = false;
  nn::Matrix next = out.scores;
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    double delta = 0.0;
    for (Eigen::Index u = 0; u < n; ++u) {
      if (clamped[static_cast<std::size_t>(u)]) continue;
      next.row(u).setZero();
      for (SparseMatrix::InnerIterator e(a, u); e; ++e) next.row(u) += e.value() * out.scores.row(e.col());
      next.row(u) *= alpha / (1.0 + alpha * degree(u));
      delta = std::max(delta, (next.row(u) - out.scores.row(u)).cwiseAbs().maxCoeff());
    }
    out.scores.swap(next);
    // Clamped rows are never written, so both buffers keep them one-hot.
    out.deltas.push_back(delta);
    out.iterations = it + 1;
    if (delta < options.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

LabelDistribution lp_closed_form_small(const SparseMatrix& a, const LabelSet& labels, double alpha) {
  check_inputs(a, labels, alpha);
  const auto n = a.rows();
  if (static_cast<std::size_t>(n) > kClosedFormLimit)
    throw Error(ErrorCode::kInvalidArgument, "dense label propagation limited to " +
                                                 std::to_string(kClosedFormLimit) + " objects");
  const nn::Matrix y = one_hot(a, labels);
  std::vector<Eigen::Index> unlabeled;
  std::vector<Eigen::Index> position(static_cast<std::size_t>(n), -1);
  for (Eigen::Index u = 0; u < n; ++u) {
    if (labels.contains(static_cast<ObjectIndex>(u))) continue;
    position[static_cast<std::size_t>(u)] = static_cast<Eigen::Index>(unlabeled.size());
    unlabeled.push_back(u);
  }

  LabelDistribution out;
  out.scores = y;
  if (unlabeled.empty()) return out;

  const auto m = static_cast<Eigen::Index>(unlabeled.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, y.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto u = unlabeled[static_cast<std::size_t>(i)];
    for (SparseMatrix::InnerIterator e(a, u); e; ++e) {
      system(i, i) += alpha * e.value();
      const auto j = position[static_cast<std::size_t>(e.col())];
      if (j >= 0)
        system(i, j) -= alpha * e.value();
      else
        rhs.row(i) += alpha * e.value() * y.row(e.col());
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::kNumerical, "I + alpha L is not positive definite");
  const Eigen::MatrixXd f = llt.solve(rhs);
  for (Eigen::Index i = 0; i < m; ++i) out.scores.row(unlabeled[static_cast<std::size_t>(i)]) = f.row(i);
  return out;
}

}  // namespace nep::lp
