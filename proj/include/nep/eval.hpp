#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nep/baseline.hpp"
#include "nep/hetgraph.hpp"
#include "nep/trainer.hpp"

namespace nep::eval {

struct Split {
  LabelSet train;
  LabelSet test;
};

/// Stratified split: each class contributes round(train_fraction * n_c)
/// objects to train, clamped so both sides keep at least one member.
/// Throws kStratification when a non-empty class has fewer than 2 members.
Split split(const LabelSet& labels, double train_fraction, std::uint64_t seed);

/// Exact-match fraction. Both sides must cover the same object set.
double accuracy(std::span<const ObjectIndex> objects, std::span<const ClassId> predicted,
                const LabelSet& truth);

/// C x C counts, rows indexed by the true class.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const ObjectIndex> objects,
                                                       std::span<const ClassId> predicted,
                                                       const LabelSet& truth);

struct LpMethod {
  lp::PropagationOptions options;
};

using Method = std::variant<TrainConfig, LpMethod>;

std::string method_name(const Method& method);
/// Stable key=value rendering used for the fingerprint.
std::string describe(const Method& method);

struct ExperimentConfig {
  std::size_t runs = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct RunResult {
  std::size_t run = 0;
  double accuracy = 0.0;
  double seconds = 0.0;
  std::size_t uncovered = 0;  // test objects predicted by the majority fallback
};

struct ExperimentReport {
  std::string method;
  std::string fingerprint;  // FNV-1a over the method and protocol
  std::vector<RunResult> runs;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1); 0 for one run
  double wall_seconds = 0.0;

  void write_table(std::ostream& out) const;
  /// One `run<TAB>...` line per run and one `summary<TAB>...` line.
  void write_records(std::ostream& out) const;
};

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

std::uint64_t fnv1a(std::string_view text);

/// Predicted classes for `objects` after fitting on `train`.
std::vector<ClassId> fit_predict(const HetGraph& graph, const LabelSet& train, const Method& method,
                                 std::uint64_t seed, std::span<const ObjectIndex> objects,
                                 std::size_t* uncovered = nullptr);

/// Run r splits with seed + r, fits on the train side only and scores the
/// test side.
ExperimentReport run_experiment(const HetGraph& graph, const LabelSet& labels, const Method& method,
                                const ExperimentConfig& config);

}  // namespace nep::eval
