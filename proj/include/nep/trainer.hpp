#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nep/hetgraph.hpp"
#include "nep/nn/adam.hpp"
#include "nep/nn/checkpoint.hpp"
#include "nep/nn/layers.hpp"
#include "nep/nn/tape.hpp"
#include "nep/sampler.hpp"

namespace nep {

struct TrainConfig {
  Variant variant = Variant::kLabel;
  bool linear = false;  // identity activations everywhere
  std::size_t dim = 64;
  double lambda = 1.0;
  std::size_t iterations = 1000;  // Gamma
  std::size_t batch_size = 1000;  // B
  std::size_t max_len = 5;        // L
  double learning_rate = 1e-3;
  std::size_t supervised_batch = 0;  // 0: min(B, M)
  std::uint64_t seed = 1;
  std::string targeted_type;
  std::size_t early_stop_patience = 0;  // 0 disables early stopping
  std::size_t eval_every = 0;           // 0: max(1, iterations / 100)
  std::size_t module_depth = 1;         // Q_t
  std::size_t predictor_hidden = 1;     // Q_n
  nn::Activation link_activation = nn::Activation::kSigmoid;
  nn::Activation hidden_activation = nn::Activation::kRelu;
  nn::CompositionOrder order = nn::CompositionOrder::kTraversal;
  double grad_clip = 5.0;  // global norm; <= 0 disables

  void validate() const;
  std::size_t evaluation_interval() const;
  std::map<std::string, std::string> to_map() const;
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
};

/// How a configuration wires the sampler and the embedding table.
struct VariantWiring {
  bool embed_all = true;          // rows for every object, not just targeted
  bool stop_at_target = false;    // walks end at targeted objects
  bool reverse_sampling = false;  // batch destinations are labeled
  nn::Activation link_activation = nn::Activation::kSigmoid;
  nn::Activation hidden_activation = nn::Activation::kRelu;
};

VariantWiring select_variant(const TrainConfig& config);

struct LossRecord {
  std::size_t step = 0;
  double supervised = 0.0;   // J_l
  double propagation = 0.0;  // J_u'
  double total = 0.0;        // J' = J_l + lambda * J_u'
};

struct LossReport {
  std::vector<LossRecord> records;
  /// Mean of J' over records [begin, end).
  double mean_total(std::size_t begin, std::size_t end) const;
  void write(std::ostream& out) const;  // step<TAB>J_l<TAB>J_u'<TAB>J'
};

struct Model {
  TrainConfig config;
  ObjectTypeId targeted;
  std::vector<std::string> class_names;
  ClassId majority_class = 0;
  nn::ParameterStore params;
  nn::EmbeddingTable table;
  nn::LinkModuleSet modules;
  nn::Predictor predictor;
  LossReport log;

  std::size_t num_classes() const { return class_names.size(); }
};

/// Fresh model with randomly initialised parameters, sized for `graph`.
Model init_model(const HetGraph& graph, const LabelSet& labels, const TrainConfig& config);

/// Runs the two-step-sampling training loop: each iteration draws one
/// PathBatch, evaluates J_u' on it and J_l on a labeled mini-batch, and
/// takes one Adam step on J' = J_l + lambda * J_u'.
class Trainer {
 public:
  using Observer = std::function<void(std::size_t step, const Model& model)>;

  Trainer(const HetGraph& graph, const LabelSet& labels, TrainConfig config);

  /// Called after every `every`-th completed step (and after the last).
  void set_observer(std::size_t every, Observer observer);

  /// One iteration. Throws kDiverged after restoring the last good state
  /// when J' or a gradient is non-finite.
  void step();
  /// All remaining iterations, honouring early stopping.
  void run();

  std::size_t steps_done() const { return step_; }
  bool stopped_early() const { return stopped_early_; }
  const Model& model() const { return model_; }
  Model& model() { return model_; }
  Model release() { return std::move(model_); }
  /// Labels actually used for fitting (training labels minus the early
  /// stopping hold-out).
  const LabelSet& fit_labels() const { return fit_labels_; }

 private:
  void take_snapshot();
  void restore_snapshot();
  double holdout_accuracy() const;

  const HetGraph& graph_;
  LabelSet fit_labels_;
  LabelSet holdout_;
  Model model_;
  nn::Adam adam_;
  std::unique_ptr<BatchSampler> sampler_;
  Rng supervised_rng_;
  std::vector<ObjectIndex> sup_pool_;
  std::size_t step_ = 0;
  bool stopped_early_ = false;
  std::optional<nn::Checkpoint> snapshot_;
  std::size_t observe_every_ = 0;
  Observer observer_;
};

Model train_nep(const HetGraph& graph, const LabelSet& labels, const TrainConfig& config);

struct Prediction {
  std::vector<ObjectIndex> objects;
  std::vector<ClassId> classes;
  /// Objects without a trained embedding row; predicted as the majority
  /// training class.
  std::vector<ObjectIndex> uncovered;
};

/// Arg-max of the predictor's softmax per object; ties go to the lowest id.
Prediction predict_labels(const Model& model, const HetGraph& graph,
                          std::span<const ObjectIndex> objects);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path, const HetGraph& graph);

/// `id<TAB>v1,...,vK` for every embedded object.
void write_embeddings(std::ostream& out, const Model& model, const HetGraph& graph);

/// Derives independent stream seeds from one user seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nep
