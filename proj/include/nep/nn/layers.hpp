#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nep/hetgraph.hpp"
#include "nep/sampler.hpp"

namespace nep::nn {

/// Row-major so that a batch is one row per example.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

struct ParamId {
  std::uint32_t value = 0;
  auto operator<=>(const ParamId&) const = default;
};

/// Owns every dense trainable tensor of a model. Biases are 1 x n matrices.
class ParameterStore {
 public:
  ParamId add(std::string name, Matrix init);

  Matrix& value(ParamId id);
  const Matrix& value(ParamId id) const;
  const std::string& name(ParamId id) const;
  std::optional<ParamId> find(std::string_view name) const;
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

enum class Activation { kIdentity, kSigmoid, kRelu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

void apply_activation(Activation a, Matrix& z);
/// Multiplies `grad` in place by the activation derivative, given the
/// activation's output.
void scale_by_derivative(Activation a, const Matrix& output, Matrix& grad);

/// y = act(W x + b) applied row-wise: Y = act(X W^T + 1 b).
struct DenseLayer {
  ParamId weight;
  std::optional<ParamId> bias;
  Activation activation = Activation::kIdentity;
};

/// Feed-forward module owned by one directional link type. All layers are
/// square so modules compose in any order.
struct LinkModule {
  std::vector<DenseLayer> layers;
};

enum class CompositionOrder {
  kTraversal,  // module of the first link applied first
  kNotation,   // module of the last link applied first
};

std::string_view to_string(CompositionOrder o);
CompositionOrder parse_composition_order(std::string_view name);

class LinkModuleSet {
 public:
  LinkModuleSet() = default;
  explicit LinkModuleSet(std::vector<LinkModule> modules) : modules_(std::move(modules)) {}

  const LinkModule& at(LinkTypeId t) const;
  std::size_t size() const { return modules_.size(); }
  /// Modules in application order for `metapath`.
  std::vector<const LinkModule*> chain(const MetaPath& metapath, CompositionOrder order) const;

 private:
  std::vector<LinkModule> modules_;
};

/// Hidden ReLU layers followed by the bias-free classification matrix.
struct Predictor {
  std::vector<DenseLayer> hidden;
  ParamId classifier;  // |Y| x width
};

/// Glorot-uniform weights, zero biases.
DenseLayer make_dense(ParameterStore& store, std::string name, std::size_t in, std::size_t out,
                      bool with_bias, Activation act, Rng& rng);

/// One module per link type in `schema`, each `depth` square layers of
/// width `dim`.
LinkModuleSet make_link_modules(ParameterStore& store, const Schema& schema, std::size_t dim,
                                std::size_t depth, Activation act, Rng& rng);

Predictor make_predictor(ParameterStore& store, std::size_t dim, std::size_t hidden_layers,
                         std::size_t num_classes, Activation hidden_act, Rng& rng);

Matrix dense_forward(const ParameterStore& store, const DenseLayer& layer, const Matrix& x);
Matrix module_forward(const ParameterStore& store, const LinkModule& module, const Matrix& x);
Matrix predictor_logits(const ParameterStore& store, const Predictor& predictor, const Matrix& x);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

/// Trainable lookup table. Only the objects passed at construction own a
/// row; everything else raises kMissingEmbedding on lookup.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Rows initialised i.i.d. N(0, 1/dim).
  EmbeddingTable(std::vector<ObjectIndex> objects, std::size_t num_objects, std::size_t dim,
                 Rng& rng);
  /// Restores a table from stored values (one row per entry of `objects`).
  EmbeddingTable(std::vector<ObjectIndex> objects, std::size_t num_objects, Matrix values,
                 std::vector<std::uint8_t> touched);

  std::size_t num_objects() const { return row_of_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::span<const ObjectIndex> objects() const { return objects_; }

  std::optional<std::size_t> row_of(ObjectIndex v) const;
  std::size_t require_row(ObjectIndex v) const;
  bool has_row(ObjectIndex v) const { return row_of(v).has_value(); }

  RowVector embed(ObjectIndex v) const { return values_.row(static_cast<Eigen::Index>(require_row(v))); }

  Matrix& values() { return values_; }
  const Matrix& values() const { return values_; }

  /// Set when the optimizer has updated a row at least once.
  bool touched(std::size_t row) const { return touched_[row] != 0; }
  void mark_touched(std::size_t row) { touched_[row] = 1; }
  std::vector<std::uint8_t>& touched_flags() { return touched_; }
  const std::vector<std::uint8_t>& touched_flags() const { return touched_; }

 private:
  std::vector<ObjectIndex> objects_;
  std::vector<std::int64_t> row_of_;
  Matrix values_;
  std::vector<std::uint8_t> touched_;
};

}  // namespace nep::nn
