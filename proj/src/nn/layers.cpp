#include "nep/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "nep/error.hpp"

namespace nep::nn {

ParamId ParameterStore::add(std::string name, Matrix init) {
  if (find(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return ParamId{static_cast<std::uint32_t>(values_.size() - 1)};
}

Matrix& ParameterStore::value(ParamId id) {
  if (id.value >= values_.size()) throw Error(ErrorCode::kOutOfRange, "parameter id out of range");
  return values_[id.value];
}

const Matrix& ParameterStore::value(ParamId id) const {
  if (id.value >= values_.size()) throw Error(ErrorCode::kOutOfRange, "parameter id out of range");
  return values_[id.value];
}

const std::string& ParameterStore::name(ParamId id) const {
  if (id.value >= names_.size()) throw Error(ErrorCode::kOutOfRange, "parameter id out of range");
  return names_[id.value];
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return ParamId{static_cast<std::uint32_t>(i)};
  return std::nullopt;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw Error(ErrorCode::kInvalidArgument, "unknown activation '" + std::string(name) + "'");
}

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::kIdentity: return;
    case Activation::kSigmoid:
      z = z.unaryExpr([](double x) {
        // Split on sign so exp never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
      return;
    case Activation::kRelu: z = z.cwiseMax(0.0); return;
  }
}

void scale_by_derivative(Activation a, const Matrix& output, Matrix& grad) {
  switch (a) {
    case Activation::kIdentity: return;
    case Activation::kSigmoid:
      grad.array() *= output.array() * (1.0 - output.array());
      return;
    case Activation::kRelu:
      grad.array() *= (output.array() > 0.0).cast<double>();
      return;
  }
}

std::string_view to_string(CompositionOrder o) {
  return o == CompositionOrder::kTraversal ? "traversal" : "notation";
}

CompositionOrder parse_composition_order(std::string_view name) {
  if (name == "traversal") return CompositionOrder::kTraversal;
  if (name == "notation") return CompositionOrder::kNotation;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown composition order '" + std::string(name) + "'");
}

const LinkModule& LinkModuleSet::at(LinkTypeId t) const {
  if (t.value >= modules_.size())
    throw Error(ErrorCode::kUnknownLinkType,
                "no module for link type " + std::to_string(t.value));
  return modules_[t.value];
}

std::vector<const LinkModule*> LinkModuleSet::chain(const MetaPath& metapath,
                                                    CompositionOrder order) const {
  if (metapath.empty()) throw Error(ErrorCode::kInvalidArgument, "empty metapath");
  std::vector<const LinkModule*> out;
  out.reserve(metapath.length());
  for (const auto t : metapath.links()) out.push_back(&at(t));
  if (order == CompositionOrder::kNotation) std::reverse(out.begin(), out.end());
  return out;
}

DenseLayer make_dense(ParameterStore& store, std::string name, std::size_t in, std::size_t out,
                      bool with_bias, Activation act, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  DenseLayer layer;
  layer.activation = act;
  layer.weight = store.add(name + ".weight", std::move(w));
  if (with_bias)
    layer.bias = store.add(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
  return layer;
}

LinkModuleSet make_link_modules(ParameterStore& store, const Schema& schema, std::size_t dim,
                                std::size_t depth, Activation act, Rng& rng) {
  if (depth == 0) throw Error(ErrorCode::kInvalidArgument, "module depth must be >= 1");
  std::vector<LinkModule> modules(schema.num_link_types());
  for (std::size_t t = 0; t < modules.size(); ++t) {
    const auto& name = schema.link(LinkTypeId{static_cast<std::uint16_t>(t)}).name;
    for (std::size_t q = 0; q < depth; ++q)
      modules[t].layers.push_back(
          make_dense(store, "link." + name + "." + std::to_string(q), dim, dim, true, act, rng));
  }
  return LinkModuleSet(std::move(modules));
}

Predictor make_predictor(ParameterStore& store, std::size_t dim, std::size_t hidden_layers,
                         std::size_t num_classes, Activation hidden_act, Rng& rng) {
  Predictor p;
  for (std::size_t q = 0; q < hidden_layers; ++q)
    p.hidden.push_back(
        make_dense(store, "predictor.hidden." + std::to_string(q), dim, dim, true, hidden_act, rng));
  p.classifier = make_dense(store, "predictor.classifier", dim, num_classes, false,
                            Activation::kIdentity, rng)
                     .weight;
  return p;
}

Matrix dense_forward(const ParameterStore& store, const DenseLayer& layer, const Matrix& x) {
  const auto& w = store.value(layer.weight);
  if (x.cols() != w.cols())
    throw Error(ErrorCode::kDimensionMismatch,
                "layer expects width " + std::to_string(w.cols()) + ", got " +
                    std::to_string(x.cols()));
  Matrix z = x * w.transpose();
  if (layer.bias) z.rowwise() += store.value(*layer.bias).row(0);
  apply_activation(layer.activation, z);
  return z;
}

Matrix module_forward(const ParameterStore& store, const LinkModule& module, const Matrix& x) {
  Matrix h = x;
  for (const auto& layer : module.layers) h = dense_forward(store, layer, h);
  return h;
}

Matrix predictor_logits(const ParameterStore& store, const Predictor& predictor, const Matrix& x) {
  Matrix h = x;
  for (const auto& layer : predictor.hidden) h = dense_forward(store, layer, h);
  return dense_forward(store, DenseLayer{predictor.classifier, std::nullopt, Activation::kIdentity},
                       h);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

EmbeddingTable::EmbeddingTable(std::vector<ObjectIndex> objects, std::size_t num_objects,
                               std::size_t dim, Rng& rng)
    : objects_(std::move(objects)), row_of_(num_objects, -1) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
  values_.resize(static_cast<Eigen::Index>(objects_.size()), static_cast<Eigen::Index>(dim));
  touched_.assign(objects_.size(), 0);
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(dim)));
  for (std::size_t r = 0; r < objects_.size(); ++r) {
    const auto v = objects_[r];
    if (v >= num_objects) throw Error(ErrorCode::kOutOfRange, "embedded object out of range");
    if (row_of_[v] >= 0) throw Error(ErrorCode::kInvalidArgument, "object embedded twice");
    row_of_[v] = static_cast<std::int64_t>(r);
    for (std::size_t k = 0; k < dim; ++k)
      values_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = dist(rng);
  }
}

EmbeddingTable::EmbeddingTable(std::vector<ObjectIndex> objects, std::size_t num_objects,
                               Matrix values, std::vector<std::uint8_t> touched)
    : objects_(std::move(objects)),
      row_of_(num_objects, -1),
      values_(std::move(values)),
      touched_(std::move(touched)) {
  if (static_cast<std::size_t>(values_.rows()) != objects_.size() ||
      touched_.size() != objects_.size())
    throw Error(ErrorCode::kDimensionMismatch, "embedding rows do not match object list");
  for (std::size_t r = 0; r < objects_.size(); ++r) {
    const auto v = objects_[r];
    if (v >= num_objects || row_of_[v] >= 0)
      throw Error(ErrorCode::kInvalidArgument, "invalid embedded object list");
    row_of_[v] = static_cast<std::int64_t>(r);
  }
}

std::optional<std::size_t> EmbeddingTable::row_of(ObjectIndex v) const {
  if (v >= row_of_.size() || row_of_[v] < 0) return std::nullopt;
  return static_cast<std::size_t>(row_of_[v]);
}

std::size_t EmbeddingTable::require_row(ObjectIndex v) const {
  if (auto r = row_of(v)) return *r;
  throw Error(ErrorCode::kMissingEmbedding,
              "object " + std::to_string(v) + " has no embedding row");
}

}  // namespace nep::nn
