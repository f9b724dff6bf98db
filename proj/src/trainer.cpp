#include "nep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nep/error.hpp"

namespace nep {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ------------------------------------------------------------ TrainConfig

void TrainConfig::validate() const {
  if (iterations == 0) throw Error(ErrorCode::kInvalidArgument, "iterations (gamma) must be >= 1");
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (max_len == 0) throw Error(ErrorCode::kInvalidArgument, "max path length must be >= 1");
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  if (module_depth == 0) throw Error(ErrorCode::kInvalidArgument, "module depth must be >= 1");
  if (targeted_type.empty()) throw Error(ErrorCode::kInvalidArgument, "targeted type not set");
}

std::size_t TrainConfig::evaluation_interval() const {
  if (eval_every > 0) return eval_every;
  return std::max<std::size_t>(1, iterations / 100);
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  };
  return {
      {"variant", std::string(to_string(variant))},
      {"linear", linear ? "1" : "0"},
      {"dim", std::to_string(dim)},
      {"lambda", num(lambda)},
      {"iterations", std::to_string(iterations)},
      {"batch_size", std::to_string(batch_size)},
      {"max_len", std::to_string(max_len)},
      {"learning_rate", num(learning_rate)},
      {"supervised_batch", std::to_string(supervised_batch)},
      {"seed", std::to_string(seed)},
      {"targeted_type", targeted_type},
      {"early_stop_patience", std::to_string(early_stop_patience)},
      {"eval_every", std::to_string(eval_every)},
      {"module_depth", std::to_string(module_depth)},
      {"predictor_hidden", std::to_string(predictor_hidden)},
      {"link_activation", std::string(nn::to_string(link_activation))},
      {"hidden_activation", std::string(nn::to_string(hidden_activation))},
      {"order", std::string(nn::to_string(order))},
      {"grad_clip", num(grad_clip)},
  };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("variant")) c.variant = parse_variant(*v);
    if (auto v = get("linear")) c.linear = *v == "1" || *v == "true";
    if (auto v = get("dim")) c.dim = std::stoul(*v);
    if (auto v = get("lambda")) c.lambda = std::stod(*v);
    if (auto v = get("iterations")) c.iterations = std::stoul(*v);
    if (auto v = get("batch_size")) c.batch_size = std::stoul(*v);
    if (auto v = get("max_len")) c.max_len = std::stoul(*v);
    if (auto v = get("learning_rate")) c.learning_rate = std::stod(*v);
    if (auto v = get("supervised_batch")) c.supervised_batch = std::stoul(*v);
    if (auto v = get("seed")) c.seed = std::stoull(*v);
    if (auto v = get("targeted_type")) c.targeted_type = *v;
    if (auto v = get("early_stop_patience")) c.early_stop_patience = std::stoul(*v);
    if (auto v = get("eval_every")) c.eval_every = std::stoul(*v);
    if (auto v = get("module_depth")) c.module_depth = std::stoul(*v);
    if (auto v = get("predictor_hidden")) c.predictor_hidden = std::stoul(*v);
    if (auto v = get("link_activation")) c.link_activation = nn::parse_activation(*v);
    if (auto v = get("hidden_activation")) c.hidden_activation = nn::parse_activation(*v);
    if (auto v = get("order")) c.order = nn::parse_composition_order(*v);
    if (auto v = get("grad_clip")) c.grad_clip = std::stod(*v);
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kParse, std::string("bad training configuration value: ") + e.what());
  }
  return c;
}

VariantWiring select_variant(const TrainConfig& config) {
  VariantWiring w;
  switch (config.variant) {
    case Variant::kBasic: break;
    case Variant::kTarget:
      w.embed_all = false;
      w.stop_at_target = true;
      break;
    case Variant::kLabel:
      w.embed_all = false;
      w.stop_at_target = true;
      w.reverse_sampling = true;
      break;
  }
  w.link_activation = config.linear ? nn::Activation::kIdentity : config.link_activation;
  w.hidden_activation = config.linear ? nn::Activation::kIdentity : config.hidden_activation;
  return w;
}

// ------------------------------------------------------------- LossReport

double LossReport::mean_total(std::size_t begin, std::size_t end) const {
  end = std::min(end, records.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += records[i].total;
  return s / static_cast<double>(end - begin);
}

void LossReport::write(std::ostream& out) const {
  const auto old = out.precision(17);
  for (const auto& r : records)
    out << r.step << '\t' << r.supervised << '\t' << r.propagation << '\t' << r.total << '\n';
  out.precision(old);
}

// ------------------------------------------------------------------ Model

namespace {

ClassId majority(const LabelSet& labels) {
  const auto counts = labels.class_counts();
  if (counts.empty()) return 0;
  return static_cast<ClassId>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

Model init_model(const HetGraph& graph, const LabelSet& labels, const TrainConfig& config) {
  config.validate();
  if (labels.empty()) throw Error(ErrorCode::kEmptyLabels, "training needs at least one label");
  const auto targeted = graph.schema().object_type(config.targeted_type);
  if (labels.targeted_type() != targeted)
    throw Error(ErrorCode::kNotTargeted, "labels are not on the configured targeted type");

  const auto wiring = select_variant(config);
  Model m;
  m.config = config;
  m.targeted = targeted;
  m.class_names = labels.class_names();
  m.majority_class = majority(labels);

  Rng rng(derive_seed(config.seed, 0));
  std::vector<ObjectIndex> embedded;
  if (wiring.embed_all) {
    embedded.resize(graph.num_objects());
    for (std::size_t v = 0; v < embedded.size(); ++v) embedded[v] = static_cast<ObjectIndex>(v);
  } else {
    const auto objs = graph.objects_of_type(targeted);
    embedded.assign(objs.begin(), objs.end());
  }
  m.table = nn::EmbeddingTable(std::move(embedded), graph.num_objects(), config.dim, rng);
  m.modules = nn::make_link_modules(m.params, graph.schema(), config.dim, config.module_depth,
                                    wiring.link_activation, rng);
  m.predictor = nn::make_predictor(m.params, config.dim, config.predictor_hidden,
                                   m.class_names.size(), wiring.hidden_activation, rng);
  return m;
}

// ---------------------------------------------------------------- Trainer

Trainer::Trainer(const HetGraph& graph, const LabelSet& labels, TrainConfig config)
    : graph_(graph), supervised_rng_(derive_seed(config.seed, 2)) {
  config.validate();
  fit_labels_ = labels;
  if (config.early_stop_patience > 0 && labels.size() >= 2) {
    Rng rng(derive_seed(config.seed, 3));
    std::vector<ObjectIndex> objs(labels.objects().begin(), labels.objects().end());
    std::shuffle(objs.begin(), objs.end(), rng);
    const auto n_hold = std::max<std::size_t>(1, objs.size() / 10);
    std::vector<ObjectIndex> hold(objs.begin(), objs.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<ObjectIndex> fit(objs.begin() + static_cast<std::ptrdiff_t>(n_hold), objs.end());
    std::sort(hold.begin(), hold.end());
    std::sort(fit.begin(), fit.end());
    holdout_ = labels.subset(hold);
    fit_labels_ = labels.subset(fit);
  }
  model_ = init_model(graph, fit_labels_, config);
  adam_ = nn::Adam(nn::AdamConfig{config.learning_rate});

  BatchSamplerConfig sc;
  sc.variant = config.variant;
  sc.batch_size = config.batch_size;
  sc.max_len = config.max_len;
  sc.targeted = model_.targeted;
  sampler_ = std::make_unique<BatchSampler>(graph, fit_labels_, sc, derive_seed(config.seed, 1));
  sup_pool_.assign(fit_labels_.objects().begin(), fit_labels_.objects().end());
}

void Trainer::set_observer(std::size_t every, Observer observer) {
  observe_every_ = every;
  observer_ = std::move(observer);
}

void Trainer::take_snapshot() { snapshot_ = nn::snapshot(model_.params, model_.table); }

void Trainer::restore_snapshot() {
  if (snapshot_) nn::restore(*snapshot_, model_.params, model_.table);
}

void Trainer::step() {
  const auto& config = model_.config;
  if (!snapshot_) take_snapshot();

  const auto batch = sampler_->next();

  // Supervised mini-batch: min(B, M) labeled objects without replacement.
  const std::size_t want = config.supervised_batch > 0 ? config.supervised_batch : config.batch_size;
  const std::size_t m = std::min(want, sup_pool_.size());
  for (std::size_t i = 0; i < m; ++i)
    std::swap(sup_pool_[i], sup_pool_[i + uniform_index(supervised_rng_, sup_pool_.size() - i)]);
  std::vector<ObjectIndex> sup_objects(sup_pool_.begin(), sup_pool_.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<ClassId> sup_labels;
  sup_labels.reserve(m);
  for (const auto v : sup_objects) sup_labels.push_back(fit_labels_.label(v));

  nn::Tape tape(model_.params);
  const auto j_l = tape.cross_entropy(tape.logits(model_.predictor, tape.embed(model_.table, sup_objects)),
                                      sup_labels);
  double j_u_value = 0.0;
  nn::Var total = j_l;
  if (batch && batch->size() > 0) {
    if (config.lambda > 0.0) {
      std::vector<ObjectIndex> src, dst;
      src.reserve(batch->size());
      dst.reserve(batch->size());
      for (const auto& [s, d] : batch->pairs) {
        src.push_back(s);
        dst.push_back(d);
      }
      const auto propagated =
          tape.compose(model_.modules, batch->metapath, tape.embed(model_.table, src), config.order);
      const auto j_u = tape.squared_error(propagated, tape.embed(model_.table, dst));
      j_u_value = tape.scalar(j_u);
      total = tape.weighted_sum(j_l, 1.0, j_u, config.lambda);
    } else {
      // Reported only; with lambda = 0 the modules are kept off the tape.
      j_u_value = nn::propagation_loss(model_.params, model_.modules, model_.table, *batch,
                                       config.order)
                      .loss;
    }
  }

  LossRecord rec;
  rec.step = step_;
  rec.supervised = tape.scalar(j_l);
  rec.propagation = j_u_value;
  rec.total = config.lambda > 0.0 && batch && batch->size() > 0
                  ? tape.scalar(total)
                  : rec.supervised + config.lambda * rec.propagation;

  if (!std::isfinite(rec.total)) {
    restore_snapshot();
    throw Error(ErrorCode::kDiverged, "J' became non-finite at step " + std::to_string(step_) +
                                          "; model restored to the last good state");
  }
  auto grads = tape.backward(total);
  if (!grads.all_finite()) {
    restore_snapshot();
    throw Error(ErrorCode::kDiverged, "non-finite gradient at step " + std::to_string(step_) +
                                          "; model restored to the last good state");
  }
  if (config.grad_clip > 0.0) grads.clip_global_norm(config.grad_clip);
  adam_.step(model_.params, &model_.table, grads);

  model_.log.records.push_back(rec);
  ++step_;
  if (step_ % config.evaluation_interval() == 0) take_snapshot();
  if (observer_ && observe_every_ > 0 &&
      (step_ % observe_every_ == 0 || step_ == config.iterations))
    observer_(step_, model_);
}

double Trainer::holdout_accuracy() const {
  if (holdout_.empty()) return 0.0;
  const auto pred = predict_labels(model_, graph_, holdout_.objects());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.objects.size(); ++i)
    if (pred.classes[i] == holdout_.classes()[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pred.objects.size());
}

void Trainer::run() {
  const auto& config = model_.config;
  const auto interval = config.evaluation_interval();
  const bool early = config.early_stop_patience > 0 && !holdout_.empty();
  double best = -1.0;
  std::size_t since_best = 0;
  std::optional<nn::Checkpoint> best_state;
  while (step_ < config.iterations) {
    step();
    if (early && step_ % interval == 0) {
      const double acc = holdout_accuracy();
      if (acc > best) {
        best = acc;
        since_best = 0;
        best_state = nn::snapshot(model_.params, model_.table);
      } else if (++since_best >= config.early_stop_patience) {
        stopped_early_ = true;
        break;
      }
    }
  }
  if (stopped_early_ && best_state) nn::restore(*best_state, model_.params, model_.table);
}

Model train_nep(const HetGraph& graph, const LabelSet& labels, const TrainConfig& config) {
  Trainer trainer(graph, labels, config);
  trainer.run();
  return trainer.release();
}

// ------------------------------------------------------------- prediction

Prediction predict_labels(const Model& model, const HetGraph& graph,
                          std::span<const ObjectIndex> objects) {
  Prediction out;
  out.objects.assign(objects.begin(), objects.end());
  out.classes.assign(objects.size(), model.majority_class);

  std::vector<std::size_t> covered_pos;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto v = objects[i];
    if (graph.type_of(v) != model.targeted)
      throw Error(ErrorCode::kNotTargeted,
                  "cannot predict '" + graph.id(v) + "': not of the targeted type");
    const auto r = model.table.row_of(v);
    if (!r || !model.table.touched(*r)) {
      out.uncovered.push_back(v);
      continue;
    }
    covered_pos.push_back(i);
    rows.push_back(*r);
  }
  if (rows.empty()) return out;

  nn::Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.table.dim()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = model.table.values().row(static_cast<Eigen::Index>(rows[i]));
  const auto logits = nn::predictor_logits(model.params, model.predictor, x);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    out.classes[covered_pos[i]] = static_cast<ClassId>(
        nn::argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return out;
}

// ------------------------------------------------------------ persistence

void save_model(const std::filesystem::path& path, const Model& model) {
  auto meta = model.config.to_map();
  meta["classes"] = std::to_string(model.class_names.size());
  for (std::size_t c = 0; c < model.class_names.size(); ++c)
    meta["class." + std::to_string(c)] = model.class_names[c];
  meta["majority_class"] = std::to_string(model.majority_class);
  nn::save_checkpoint(path, nn::snapshot(model.params, model.table, std::move(meta)));
}

Model load_model(const std::filesystem::path& path, const HetGraph& graph) {
  const auto ckpt = nn::load_checkpoint(path);
  const auto config = TrainConfig::from_map(ckpt.metadata);
  const auto it = ckpt.metadata.find("classes");
  if (it == ckpt.metadata.end()) throw Error(ErrorCode::kCheckpoint, "checkpoint lacks class list");
  const auto n = std::stoul(it->second);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) names.push_back(ckpt.metadata.at("class." + std::to_string(c)));

  // A placeholder label set sizes the predictor; the loaded tensors
  // overwrite every initial value.
  const auto targeted = graph.schema().object_type(config.targeted_type);
  const auto objs = graph.objects_of_type(targeted);
  if (objs.empty()) throw Error(ErrorCode::kCheckpoint, "graph has no targeted objects");
  LabelSet placeholder(targeted, names, {{objs.front(), 0}});
  if (ckpt.num_objects != graph.num_objects())
    throw Error(ErrorCode::kCheckpoint, "checkpoint was trained on a graph of different size");

  Model m = init_model(graph, placeholder, config);
  nn::restore(ckpt, m.params, m.table);
  m.majority_class = static_cast<ClassId>(std::stol(ckpt.metadata.at("majority_class")));
  return m;
}

void write_embeddings(std::ostream& out, const Model& model, const HetGraph& graph) {
  const auto old = out.precision(17);
  const auto& values = model.table.values();
  for (std::size_t r = 0; r < model.table.rows(); ++r) {
    out << graph.id(model.table.objects()[r]) << '\t';
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      if (k > 0) out << ',';
      out << values(static_cast<Eigen::Index>(r), k);
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace nep
