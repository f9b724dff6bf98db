#include "nep/nn/tape.hpp"

#include <cmath>

#include "nep/error.hpp"

namespace nep::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

// -------------------------------------------------------------- Gradients

const Matrix* Gradients::find(ParamId id) const {
  const auto it = dense.find(id);
  return it == dense.end() ? nullptr : &it->second;
}

const RowVector* Gradients::find_row(std::size_t row) const {
  const auto it = rows.find(row);
  return it == rows.end() ? nullptr : &it->second;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& [id, g] : dense) s += g.squaredNorm();
  for (const auto& [r, g] : rows) s += g.squaredNorm();
  return s;
}

bool Gradients::all_finite() const {
  for (const auto& [id, g] : dense)
    if (!g.allFinite()) return false;
  for (const auto& [r, g] : rows)
    if (!g.allFinite()) return false;
  return true;
}

void Gradients::scale(double factor) {
  for (auto& [id, g] : dense) g *= factor;
  for (auto& [r, g] : rows) g *= factor;
}

double Gradients::clip_global_norm(double max_norm) {
  const double norm = std::sqrt(squared_norm());
  if (norm > max_norm && norm > 0.0) scale(max_norm / norm);
  return norm;
}

// ------------------------------------------------------------------- Tape

Var Tape::push(Matrix value) {
  values_.push_back(std::move(value));
  return Var{static_cast<std::uint32_t>(values_.size() - 1)};
}

const Matrix& Tape::value(Var v) const {
  if (v.index >= values_.size()) throw Error(ErrorCode::kOutOfRange, "tape variable out of range");
  return values_[v.index];
}

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.size() != 1) throw Error(ErrorCode::kDimensionMismatch, "tape variable is not a scalar");
  return m(0, 0);
}

Var Tape::input(Matrix x) { return push(std::move(x)); }

Var Tape::embed(const EmbeddingTable& table, std::span<const ObjectIndex> objects) {
  if (table_ != nullptr && table_ != &table)
    throw Error(ErrorCode::kInvalidArgument, "a tape may read from one embedding table only");
  table_ = &table;
  GatherOp op;
  op.rows.reserve(objects.size());
  Matrix out(static_cast<Eigen::Index>(objects.size()), static_cast<Eigen::Index>(table.dim()));
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto r = table.require_row(objects[i]);
    op.rows.push_back(r);
    out.row(static_cast<Eigen::Index>(i)) = table.values().row(static_cast<Eigen::Index>(r));
  }
  op.out = push(std::move(out));
  const auto out_var = op.out;
  ops_.emplace_back(std::move(op));
  return out_var;
}

Var Tape::dense(const DenseLayer& layer, Var x) {
  Matrix y = dense_forward(*params_, layer, value(x));
  const auto out = push(std::move(y));
  ops_.emplace_back(DenseOp{x, out, layer});
  return out;
}

Var Tape::module(const LinkModule& module, Var x) {
  for (const auto& layer : module.layers) x = dense(layer, x);
  return x;
}

Var Tape::compose(const LinkModuleSet& modules, const MetaPath& metapath, Var x,
                  CompositionOrder order) {
  for (const auto* m : modules.chain(metapath, order)) x = module(*m, x);
  return x;
}

Var Tape::logits(const Predictor& predictor, Var x) {
  for (const auto& layer : predictor.hidden) x = dense(layer, x);
  return dense(DenseLayer{predictor.classifier, std::nullopt, Activation::kIdentity}, x);
}

Var Tape::squared_error(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw Error(ErrorCode::kDimensionMismatch, "squared_error operands differ in shape");
  const double loss = (va - vb).squaredNorm();
  const auto out = push(scalar_matrix(loss));
  ops_.emplace_back(SquaredErrorOp{a, b, out});
  return out;
}

Var Tape::cross_entropy(Var logits, std::span<const ClassId> labels) {
  const auto& z = value(logits);
  if (static_cast<std::size_t>(z.rows()) != labels.size())
    throw Error(ErrorCode::kDimensionMismatch, "one label per logit row required");
  CrossEntropyOp op;
  op.logits = logits;
  op.labels.assign(labels.begin(), labels.end());
  op.probs = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols())
      throw Error(ErrorCode::kOutOfRange, "class id " + std::to_string(y) + " out of range");
    // log-sum-exp form keeps saturated logits exact.
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += lse - z(i, y);
  }
  op.out = push(scalar_matrix(loss));
  const auto out = op.out;
  ops_.emplace_back(std::move(op));
  return out;
}

Var Tape::weighted_sum(Var a, double wa, Var b, double wb) {
  const auto out = push(scalar_matrix(wa * scalar(a) + wb * scalar(b)));
  ops_.emplace_back(WeightedSumOp{a, b, out, wa, wb});
  return out;
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& slot = adjoints_[v.index];
  if (slot)
    *slot += g;
  else
    slot = g;
}

const Matrix* Tape::adjoint(Var v) const {
  if (v.index >= adjoints_.size() || !adjoints_[v.index]) return nullptr;
  return &*adjoints_[v.index];
}

Gradients Tape::backward(Var loss) {
  if (consumed_) throw Error(ErrorCode::kTapeConsumed, "tape already consumed by backward()");
  if (value(loss).size() != 1) throw Error(ErrorCode::kDimensionMismatch, "loss must be scalar");
  consumed_ = true;
  adjoints_.assign(values_.size(), std::nullopt);
  adjoints_[loss.index] = scalar_matrix(1.0);

  Gradients grads;
  auto add_dense = [&](ParamId id, const Matrix& g) {
    auto [it, inserted] = grads.dense.try_emplace(id, g);
    if (!inserted) it->second += g;
  };

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    std::visit(
        Overloaded{
            [&](const GatherOp& op) {
              const auto* g = adjoint(op.out);
              if (!g) return;
              for (std::size_t i = 0; i < op.rows.size(); ++i) {
                const RowVector gi = g->row(static_cast<Eigen::Index>(i));
                auto [slot, inserted] = grads.rows.try_emplace(op.rows[i], gi);
                if (!inserted) slot->second += gi;
              }
            },
            [&](const DenseOp& op) {
              const auto* g = adjoint(op.out);
              if (!g) return;
              Matrix dz = *g;
              scale_by_derivative(op.layer.activation, values_[op.out.index], dz);
              const auto& x = values_[op.in.index];
              add_dense(op.layer.weight, dz.transpose() * x);
              if (op.layer.bias) add_dense(*op.layer.bias, dz.colwise().sum());
              accumulate(op.in, dz * params_->value(op.layer.weight));
            },
            [&](const SquaredErrorOp& op) {
              const auto* g = adjoint(op.out);
              if (!g) return;
              const Matrix d = 2.0 * (*g)(0, 0) * (values_[op.a.index] - values_[op.b.index]);
              accumulate(op.a, d);
              accumulate(op.b, -d);
            },
            [&](const CrossEntropyOp& op) {
              const auto* g = adjoint(op.out);
              if (!g) return;
              Matrix d = op.probs;
              for (std::size_t i = 0; i < op.labels.size(); ++i)
                d(static_cast<Eigen::Index>(i), op.labels[i]) -= 1.0;
              d *= (*g)(0, 0);
              accumulate(op.logits, d);
            },
            [&](const WeightedSumOp& op) {
              const auto* g = adjoint(op.out);
              if (!g) return;
              accumulate(op.a, op.wa * *g);
              accumulate(op.b, op.wb * *g);
            },
        },
        *it);
  }
  return grads;
}

// ------------------------------------------------------ convenience ops

ForwardResult compose_forward(const ParameterStore& params, const LinkModuleSet& modules,
                              const MetaPath& metapath, const Matrix& x,
                              CompositionOrder order) {
  Tape tape(params);
  const auto in = tape.input(x);
  const auto out = tape.compose(modules, metapath, in, order);
  Matrix y = tape.value(out);
  return ForwardResult{std::move(y), std::move(tape), in, out};
}

LossResult supervised_loss(const ParameterStore& params, const Predictor& predictor,
                           const Matrix& x, std::span<const ClassId> y) {
  Tape tape(params);
  const auto in = tape.input(x);
  const auto loss = tape.cross_entropy(tape.logits(predictor, in), y);
  const double value = tape.scalar(loss);
  return LossResult{value, std::move(tape), loss};
}

LossResult propagation_loss(const ParameterStore& params, const LinkModuleSet& modules,
                            const EmbeddingTable& table, const PathBatch& batch,
                            CompositionOrder order) {
  std::vector<ObjectIndex> src, dst;
  src.reserve(batch.size());
  dst.reserve(batch.size());
  for (const auto& [s, d] : batch.pairs) {
    src.push_back(s);
    dst.push_back(d);
  }
  Tape tape(params);
  const auto propagated = tape.compose(modules, batch.metapath, tape.embed(table, src), order);
  const auto loss = tape.squared_error(propagated, tape.embed(table, dst));
  const double value = tape.scalar(loss);
  return LossResult{value, std::move(tape), loss};
}

}  // namespace nep::nn
