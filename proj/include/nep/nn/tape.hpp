#pragma once

#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "nep/nn/layers.hpp"

namespace nep::nn {

/// Sparse gradient collection: dense tensors by id, embedding rows by row
/// index. Only entries touched by the forward pass are present.
struct Gradients {
  std::map<ParamId, Matrix> dense;
  std::map<std::size_t, RowVector> rows;

  const Matrix* find(ParamId id) const;
  const RowVector* find_row(std::size_t row) const;
  double squared_norm() const;
  bool all_finite() const;
  void scale(double factor);
  /// Rescales to `max_norm` when the global L2 norm exceeds it; returns
  /// the norm before clipping.
  double clip_global_norm(double max_norm);
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t index = 0;
};

/// Records one forward computation and replays it backwards. A tape is
/// single-use: backward() may be called once.
class Tape {
 public:
  explicit Tape(const ParameterStore& params) : params_(&params) {}

  /// Leaf without parameters; its adjoint is available after backward().
  Var input(Matrix x);
  /// Gathers embedding rows for `objects` (duplicates allowed).
  Var embed(const EmbeddingTable& table, std::span<const ObjectIndex> objects);
  Var dense(const DenseLayer& layer, Var x);
  Var module(const LinkModule& module, Var x);
  Var compose(const LinkModuleSet& modules, const MetaPath& metapath, Var x,
              CompositionOrder order = CompositionOrder::kTraversal);
  Var logits(const Predictor& predictor, Var x);

  /// Scalar sum over rows of ||a - b||^2.
  Var squared_error(Var a, Var b);
  /// Scalar sum over rows of -log softmax(logits)[label].
  Var cross_entropy(Var logits, std::span<const ClassId> labels);
  /// Scalar wa * a + wb * b.
  Var weighted_sum(Var a, double wa, Var b, double wb);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  Gradients backward(Var loss);
  bool consumed() const { return consumed_; }
  /// Adjoint of a recorded value; nullptr when none reached it.
  const Matrix* adjoint(Var v) const;

 private:
  struct GatherOp {
    Var out;
    std::vector<std::size_t> rows;
  };
  struct DenseOp {
    Var in, out;
    DenseLayer layer;
  };
  struct SquaredErrorOp {
    Var a, b, out;
  };
  struct CrossEntropyOp {
    Var logits, out;
    std::vector<ClassId> labels;
    Matrix probs;
  };
  struct WeightedSumOp {
    Var a, b, out;
    double wa, wb;
  };
  using Op = std::variant<GatherOp, DenseOp, SquaredErrorOp, CrossEntropyOp, WeightedSumOp>;

  Var push(Matrix value);
  void accumulate(Var v, const Matrix& g);

  const ParameterStore* params_;
  const EmbeddingTable* table_ = nullptr;
  std::vector<Matrix> values_;
  std::vector<Op> ops_;
  std::vector<std::optional<Matrix>> adjoints_;
  bool consumed_ = false;
};

struct ForwardResult {
  Matrix output;
  Tape tape;
  Var input;
  Var result;
};

/// Stacks the link modules of `metapath` over X and records the chain.
ForwardResult compose_forward(const ParameterStore& params, const LinkModuleSet& modules,
                              const MetaPath& metapath, const Matrix& x,
                              CompositionOrder order = CompositionOrder::kTraversal);

struct LossResult {
  double loss = 0.0;
  Tape tape;
  Var result;
};

/// Cross-entropy of the predictor over embedded rows `x` with labels `y`.
LossResult supervised_loss(const ParameterStore& params, const Predictor& predictor,
                           const Matrix& x, std::span<const ClassId> y);

/// Sum over the batch of ||G_p(x_src) - x_dst||^2.
LossResult propagation_loss(const ParameterStore& params, const LinkModuleSet& modules,
                            const EmbeddingTable& table, const PathBatch& batch,
                            CompositionOrder order = CompositionOrder::kTraversal);

}  // namespace nep::nn
