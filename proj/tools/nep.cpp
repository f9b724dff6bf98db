// nep: command-line driver for training, evaluation, the LP baseline,
// path sampling and synthetic data generation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "nep/baseline.hpp"
#include "nep/error.hpp"
#include "nep/eval.hpp"
#include "nep/sampler.hpp"
#include "nep/synth.hpp"
#include "nep/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Usage or I/O failure reported before any work starts.
struct UsageError {
  std::string message;
};

struct DataArgs {
  std::string schema, nodes, edges, labels;
  std::string targeted;
};

struct CommonArgs {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool deterministic = false;
  std::string out = ".";
};

void add_data_options(CLI::App& cmd, DataArgs& d, bool labels_required) {
  cmd.add_option("--schema", d.schema, "Schema file")->required();
  cmd.add_option("--nodes", d.nodes, "Nodes file (id<TAB>type)")->required();
  cmd.add_option("--edges", d.edges, "Edges file (src<TAB>link<TAB>dst)")->required();
  auto* labels = cmd.add_option("--labels", d.labels, "Labels file (id<TAB>class)");
  if (labels_required) labels->required();
  cmd.add_option("--targeted", d.targeted, "Targeted object type")->required();
}

void add_common_options(CLI::App& cmd, CommonArgs& c) {
  cmd.add_option("--seed", c.seed, "Random seed (falls back to $NEP_SEED, then 1)");
  cmd.add_option("--threads", c.threads, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  cmd.add_flag("--deterministic", c.deterministic, "Force single-threaded lock-step execution");
  cmd.add_option("--out", c.out, "Output directory");
}

std::uint64_t resolve_seed(const CommonArgs& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("NEP_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError{std::string("NEP_SEED is not an unsigned integer: ") + env};
    }
  }
  return 1;
}

std::size_t resolve_threads(const CommonArgs& c) { return c.deterministic ? 1 : c.threads; }

void require_file(const std::string& path, const char* what) {
  if (path.empty()) return;
  if (!fs::is_regular_file(path)) throw UsageError{std::string(what) + " file not found: " + path};
}

void require_inputs(const DataArgs& d) {
  require_file(d.schema, "schema");
  require_file(d.nodes, "nodes");
  require_file(d.edges, "edges");
  require_file(d.labels, "labels");
}

fs::path output_dir(const CommonArgs& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError{"cannot create output directory " + c.out + ": " + ec.message()};
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw UsageError{"cannot write " + path.string()};
  return out;
}

nep::HetGraph load(const DataArgs& d) {
  return nep::load_graph(d.nodes, d.edges, nep::Schema::load(d.schema));
}

struct TrainArgs {
  std::string variant = "label";
  bool linear = false;
  std::size_t dim = 64;
  double lambda = 1.0;
  std::size_t gamma = 1000;
  std::size_t batch = 1000;
  std::size_t max_len = 5;
  double lr = 1e-3;
  std::size_t supervised_batch = 0;
  std::size_t patience = 0;
  std::size_t eval_every = 0;
  std::size_t module_depth = 1;
  std::size_t predictor_hidden = 1;
  std::string link_activation = "sigmoid";
  std::string hidden_activation = "relu";
  std::string order = "traversal";
  double grad_clip = 5.0;

  nep::TrainConfig to_config(const std::string& targeted, std::uint64_t seed) const {
    nep::TrainConfig c;
    c.variant = nep::parse_variant(variant);
    c.linear = linear;
    c.dim = dim;
    c.lambda = lambda;
    c.iterations = gamma;
    c.batch_size = batch;
    c.max_len = max_len;
    c.learning_rate = lr;
    c.supervised_batch = supervised_batch;
    c.seed = seed;
    c.targeted_type = targeted;
    c.early_stop_patience = patience;
    c.eval_every = eval_every;
    c.module_depth = module_depth;
    c.predictor_hidden = predictor_hidden;
    c.link_activation = nep::nn::parse_activation(link_activation);
    c.hidden_activation = nep::nn::parse_activation(hidden_activation);
    c.order = nep::nn::parse_composition_order(order);
    c.grad_clip = grad_clip;
    c.validate();
    return c;
  }
};

void add_train_options(CLI::App& cmd, TrainArgs& t) {
  cmd.add_option("--variant", t.variant, "basic | target | label")
      ->check(CLI::IsMember({"basic", "target", "label"}));
  cmd.add_flag("--linear", t.linear, "Identity activations everywhere (NEP-linear)");
  cmd.add_option("--dim", t.dim, "Embedding dimension K");
  cmd.add_option("--lambda", t.lambda, "Weight of the propagation loss");
  cmd.add_option("--gamma", t.gamma, "Outer iterations (one path batch each)");
  cmd.add_option("--batch", t.batch, "Paths per batch B");
  cmd.add_option("--max-len", t.max_len, "Maximum path length L");
  cmd.add_option("--lr", t.lr, "Adam learning rate");
  cmd.add_option("--supervised-batch", t.supervised_batch, "Labeled objects per step (0: min(B, M))");
  cmd.add_option("--patience", t.patience, "Early-stopping patience in evaluations (0: off)");
  cmd.add_option("--eval-every", t.eval_every, "Steps between evaluations (0: gamma / 100)");
  cmd.add_option("--module-depth", t.module_depth, "Layers per link module");
  cmd.add_option("--predictor-hidden", t.predictor_hidden, "Hidden layers in the predictor");
  cmd.add_option("--link-activation", t.link_activation, "identity | sigmoid | relu");
  cmd.add_option("--hidden-activation", t.hidden_activation, "identity | sigmoid | relu");
  cmd.add_option("--order", t.order, "traversal | notation");
  cmd.add_option("--grad-clip", t.grad_clip, "Global gradient norm bound (<= 0: off)");
}

void write_predictions(std::ostream& out, const nep::HetGraph& graph,
                       std::span<const nep::ObjectIndex> objects, std::span<const nep::ClassId> classes,
                       const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < objects.size(); ++i)
    out << graph.id(objects[i]) << '\t' << names[static_cast<std::size_t>(classes[i])] << '\n';
}

int cmd_train(const DataArgs& d, const CommonArgs& c, const TrainArgs& t, bool export_embeddings,
              bool predict) {
  require_inputs(d);
  const auto dir = output_dir(c);
  const auto graph = load(d);
  const auto labels = nep::load_labels(d.labels, graph, d.targeted);
  const auto config = t.to_config(d.targeted, resolve_seed(c));

  nep::Trainer trainer(graph, labels, config);
  trainer.run();
  const auto& model = trainer.model();

  nep::save_model(dir / "model.ckpt", model);
  {
    auto out = open_out(dir / "loss.tsv");
    model.log.write(out);
  }
  if (export_embeddings) {
    auto out = open_out(dir / "embeddings.tsv");
    nep::write_embeddings(out, model, graph);
  }
  if (predict) {
    const auto objects = graph.objects_of_type(labels.targeted_type());
    const auto pred = nep::predict_labels(model, graph, objects);
    auto out = open_out(dir / "predictions.tsv");
    write_predictions(out, graph, pred.objects, pred.classes, model.class_names);
  }
  std::cerr << "trained " << trainer.steps_done() << " steps"
            << (trainer.stopped_early() ? " (early stop)" : "") << "; outputs in " << dir.string()
            << '\n';
  return kExitOk;
}

int cmd_eval(const DataArgs& d, const CommonArgs& c, const TrainArgs& t, const std::string& method,
             double alpha, std::size_t runs, double train_fraction) {
  require_inputs(d);
  const auto dir = output_dir(c);
  const auto graph = load(d);
  const auto labels = nep::load_labels(d.labels, graph, d.targeted);
  const auto seed = resolve_seed(c);

  nep::eval::Method m;
  if (method == "lp") {
    nep::eval::LpMethod lp;
    lp.options.alpha = alpha;
    m = lp;
  } else {
    m = t.to_config(d.targeted, seed);
  }
  nep::eval::ExperimentConfig ec;
  ec.runs = runs;
  ec.train_fraction = train_fraction;
  ec.seed = seed;
  ec.threads = resolve_threads(c);
  const auto report = nep::eval::run_experiment(graph, labels, m, ec);
  report.write_table(std::cout);
  auto out = open_out(dir / "report.tsv");
  report.write_records(out);
  return kExitOk;
}

int cmd_baseline(const DataArgs& d, const CommonArgs& c, double alpha, std::size_t max_iters,
                 double tol) {
  require_inputs(d);
  const auto dir = output_dir(c);
  const auto graph = load(d);
  const auto labels = nep::load_labels(d.labels, graph, d.targeted);
  nep::lp::PropagationOptions options{alpha, max_iters, tol};
  const auto dist = nep::lp::label_propagate(nep::lp::homogenize(graph), labels, options);
  const auto objects = graph.objects_of_type(labels.targeted_type());
  std::vector<nep::ClassId> classes;
  for (const auto v : objects) classes.push_back(dist.predict(v));
  auto out = open_out(dir / "predictions.tsv");
  write_predictions(out, graph, objects, classes, labels.class_names());
  std::cerr << "label propagation " << (dist.converged ? "converged" : "did not converge") << " after "
            << dist.iterations << " sweeps\n";
  return dist.converged ? kExitOk : kExitRuntime;
}

int cmd_sample(const DataArgs& d, const CommonArgs& c, const std::string& variant, std::size_t count,
               std::size_t batch, std::size_t max_len) {
  require_inputs(d);
  const auto graph = load(d);
  const auto targeted = graph.schema().object_type(d.targeted);
  nep::LabelSet labels;
  if (!d.labels.empty()) labels = nep::load_labels(d.labels, graph, d.targeted);
  nep::BatchSamplerConfig config;
  config.variant = nep::parse_variant(variant);
  config.batch_size = batch;
  config.max_len = max_len;
  config.targeted = targeted;
  nep::BatchSampler sampler(graph, labels, config, nep::derive_seed(resolve_seed(c), 1));
  for (std::size_t i = 0; i < count; ++i) {
    const auto b = sampler.next();
    if (!b) throw nep::Error(nep::ErrorCode::kSamplingExhausted, "no usable seed walk for batch " +
                                                                     std::to_string(i));
    const auto mp = b->metapath.to_string(graph.schema());
    std::cout << "# batch " << i << '\t' << mp << '\t' << b->size() << '\n';
    for (const auto& [s, t] : b->pairs) std::cout << mp << '\t' << graph.id(s) << '\t' << graph.id(t) << '\n';
  }
  return kExitOk;
}

int cmd_synth(const CommonArgs& c, std::size_t classes, double homophily, double label_fraction,
              double scale, bool no_shift) {
  auto spec = nep::synth::PlantedSpec::acceptance_default();
  spec.num_classes = classes;
  spec.homophily = homophily;
  spec.label_fraction = label_fraction;
  spec.seed = resolve_seed(c);
  for (auto& [name, count] : spec.object_types)
    count = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(count) * scale));
  if (no_shift)
    for (auto& r : spec.relations) r.class_shift = 0;
  const auto planted = nep::synth::generate_planted(spec);
  const auto dir = output_dir(c);
  nep::synth::write_dataset(dir, planted);
  std::cerr << "wrote " << planted.graph.num_objects() << " objects, " << planted.total_edges
            << " edges, " << planted.revealed.size() << " labels to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural embedding propagation on heterogeneous networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file with one [section] per subcommand; flags take precedence");

  DataArgs data;
  CommonArgs common;
  TrainArgs train_args;

  auto* train = app.add_subcommand("train", "Train NEP and write checkpoint and loss log");
  add_data_options(*train, data, true);
  add_common_options(*train, common);
  add_train_options(*train, train_args);
  bool export_embeddings = false, predict = false;
  train->add_flag("--export-embeddings", export_embeddings, "Also write embeddings.tsv");
  train->add_flag("--predict", predict, "Also write predictions.tsv for every targeted object");

  auto* evaluate = app.add_subcommand("eval", "Repeated random splits: accuracy mean and std");
  add_data_options(*evaluate, data, true);
  add_common_options(*evaluate, common);
  add_train_options(*evaluate, train_args);
  std::string method = "nep";
  double alpha = 0.99;
  std::size_t runs = 10;
  double train_fraction = 0.8;
  evaluate->add_option("--method", method, "nep | lp")->check(CLI::IsMember({"nep", "lp"}));
  evaluate->add_option("--alpha", alpha, "LP smoothing strength");
  evaluate->add_option("--runs", runs, "Number of random splits")->check(CLI::PositiveNumber);
  evaluate->add_option("--train-fraction", train_fraction, "Share of labels used for training")
      ->check(CLI::Range(0.0, 1.0));

  auto* baseline = app.add_subcommand("baseline", "Label propagation on the type-suppressed graph");
  add_data_options(*baseline, data, true);
  add_common_options(*baseline, common);
  std::size_t max_iters = 1000;
  double tol = 1e-9;
  baseline->add_option("--alpha", alpha, "Smoothing strength (> 0)");
  baseline->add_option("--max-iters", max_iters, "Sweep budget");
  baseline->add_option("--tol", tol, "Convergence threshold on the max row change");

  auto* sample = app.add_subcommand("sample", "Print two-step path batches");
  sample->alias("sample-paths");
  add_data_options(*sample, data, false);
  add_common_options(*sample, common);
  std::string variant = "basic";
  std::size_t count = 10, batch = 10, max_len = 5;
  sample->add_option("--variant", variant, "basic | target | label")
      ->check(CLI::IsMember({"basic", "target", "label"}));
  sample->add_option("-n,--count", count, "Number of batches");
  sample->add_option("--batch", batch, "Paths per batch")->check(CLI::PositiveNumber);
  sample->add_option("--max-len", max_len, "Maximum path length")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write a planted synthetic dataset");
  add_common_options(*synth, common);
  std::size_t classes = 4;
  double homophily = 0.85, label_fraction = 0.05, scale = 1.0;
  bool no_shift = false;
  synth->add_option("--classes", classes, "Number of classes C")->check(CLI::Range(2, 1000));
  synth->add_option("--homophily", homophily, "Probability an edge keeps its class alignment")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--label-fraction", label_fraction, "Share of targeted objects labeled")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--scale", scale, "Multiplier on the default object counts")
      ->check(CLI::PositiveNumber);
  synth->add_flag("--no-shift", no_shift, "Make every relation align classes directly");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(data, common, train_args, export_embeddings, predict);
    if (*evaluate)
      return cmd_eval(data, common, train_args, method, alpha, runs, train_fraction);
    if (*baseline) return cmd_baseline(data, common, alpha, max_iters, tol);
    if (*sample) {
      if (variant == "label" && data.labels.empty()) throw UsageError{"--variant label needs --labels"};
      return cmd_sample(data, common, variant, count, batch, max_len);
    }
    if (*synth) return cmd_synth(common, classes, homophily, label_fraction, scale, no_shift);
  } catch (const UsageError& e) {
    std::cerr << "nep: " << e.message << '\n';
    return kExitUsage;
  } catch (const nep::Error& e) {
    std::cerr << "nep: " << to_string(e.code()) << ": " << e.what() << '\n';
    const bool io = e.code() == nep::ErrorCode::kIo;
    return io ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "nep: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
