#include "nep/nn/adam.hpp"

#include <cmath>

#include "nep/error.hpp"

namespace nep::nn {

void Adam::step(ParameterStore& params, EmbeddingTable* table, const Gradients& grads) {
  for (const auto& [id, g] : grads.dense)
    if (!g.allFinite())
      throw Error(ErrorCode::kNumerical, "non-finite gradient for '" + params.name(id) + "'");
  for (const auto& [row, g] : grads.rows)
    if (!g.allFinite())
      throw Error(ErrorCode::kNumerical,
                  "non-finite gradient for embedding row " + std::to_string(row));
  if (!grads.rows.empty() && table == nullptr)
    throw Error(ErrorCode::kInvalidArgument, "row gradients without an embedding table");

  const double b1 = config_.beta1, b2 = config_.beta2;
  const double lr = config_.learning_rate, eps = config_.epsilon;

  for (const auto& [id, g] : grads.dense) {
    auto& w = params.value(id);
    if (g.rows() != w.rows() || g.cols() != w.cols())
      throw Error(ErrorCode::kDimensionMismatch, "gradient shape differs for '" + params.name(id) + "'");
    auto [it, inserted] = dense_.try_emplace(id);
    auto& s = it->second;
    if (inserted) {
      s.m = Matrix::Zero(w.rows(), w.cols());
      s.v = Matrix::Zero(w.rows(), w.cols());
    }
    ++s.t;
    s.m = b1 * s.m + (1.0 - b1) * g;
    s.v = b2 * s.v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
  }

  if (table != nullptr && !grads.rows.empty()) {
    auto& values = table->values();
    if (row_m_.rows() != values.rows() || row_m_.cols() != values.cols()) {
      row_m_ = Matrix::Zero(values.rows(), values.cols());
      row_v_ = Matrix::Zero(values.rows(), values.cols());
      row_t_.assign(static_cast<std::size_t>(values.rows()), 0);
    }
    for (const auto& [row, g] : grads.rows) {
      if (g.size() != values.cols())
        throw Error(ErrorCode::kDimensionMismatch, "embedding gradient width differs");
      const auto r = static_cast<Eigen::Index>(row);
      const auto t = ++row_t_[row];
      row_m_.row(r) = b1 * row_m_.row(r) + (1.0 - b1) * g;
      row_v_.row(r) = b2 * row_v_.row(r) + (1.0 - b2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      values.row(r).array() -=
          lr * (row_m_.row(r).array() / c1) / ((row_v_.row(r).array() / c2).sqrt() + eps);
      table->mark_touched(row);
    }
  }
  ++steps_;
}

}  // namespace nep::nn
