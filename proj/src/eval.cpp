#include "nep/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "nep/error.hpp"
#include "nep/sampler.hpp"

namespace nep::eval {

Split split(const LabelSet& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "train fraction must lie in (0, 1)");
  std::vector<std::vector<ObjectIndex>> by_class(labels.num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(labels.classes()[i])].push_back(labels.objects()[i]);

  Rng rng(seed);
  std::vector<ObjectIndex> train, test;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2)
      throw Error(ErrorCode::kStratification, "class '" + labels.class_names()[c] +
                                                  "' has a single member and cannot be split");
    std::shuffle(members.begin(), members.end(), rng);
    auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    k = std::clamp<std::size_t>(k, 1, members.size() - 1);
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {labels.subset(train), labels.subset(test)};
}

namespace {

void check_same_objects(std::span<const ObjectIndex> objects, std::span<const ClassId> predicted,
                        const LabelSet& truth) {
  if (objects.size() != predicted.size())
    throw Error(ErrorCode::kMismatchedObjects, "prediction has " + std::to_string(objects.size()) +
                                                   " objects but " + std::to_string(predicted.size()) +
                                                   " classes");
  std::vector<ObjectIndex> sorted(objects.begin(), objects.end());
  std::sort(sorted.begin(), sorted.end());
  if (!std::equal(sorted.begin(), sorted.end(), truth.objects().begin(), truth.objects().end()))
    throw Error(ErrorCode::kMismatchedObjects, "predicted objects differ from the labeled objects");
}

}  // namespace

double accuracy(std::span<const ObjectIndex> objects, std::span<const ClassId> predicted,
                const LabelSet& truth) {
  check_same_objects(objects, predicted, truth);
  if (objects.empty()) throw Error(ErrorCode::kEmptyLabels, "accuracy over an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < objects.size(); ++i) hits += truth.label(objects[i]) == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(objects.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const ObjectIndex> objects,
                                                       std::span<const ClassId> predicted,
                                                       const LabelSet& truth) {
  check_same_objects(objects, predicted, truth);
  const auto c = truth.num_classes();
  std::vector<std::vector<std::size_t>> m(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (p >= c) throw Error(ErrorCode::kOutOfRange, "predicted class out of range");
    ++m[static_cast<std::size_t>(truth.label(objects[i]))][p];
  }
  return m;
}

std::string method_name(const Method& method) {
  if (const auto* tc = std::get_if<TrainConfig>(&method))
    return std::string("nep-") + std::string(to_string(tc->variant)) + (tc->linear ? "-linear" : "");
  return "lp";
}

std::string describe(const Method& method) {
  std::ostringstream out;
  out << std::setprecision(17);
  if (const auto* tc = std::get_if<TrainConfig>(&method)) {
    for (const auto& [k, v] : tc->to_map())
      if (k != "seed") out << k << '=' << v << ';';
  } else {
    const auto& lp = std::get<LpMethod>(method).options;
    out << "alpha=" << lp.alpha << ";max_iters=" << lp.max_iters << ";tol=" << lp.tol << ';';
  }
  return out.str();
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (const double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<ClassId> fit_predict(const HetGraph& graph, const LabelSet& train, const Method& method,
                                 std::uint64_t seed, std::span<const ObjectIndex> objects,
                                 std::size_t* uncovered) {
  if (const auto* base = std::get_if<TrainConfig>(&method)) {
    auto tc = *base;
    tc.seed = seed;
    const auto model = train_nep(graph, train, tc);
    auto pred = predict_labels(model, graph, objects);
    if (uncovered) *uncovered = pred.uncovered.size();
    return std::move(pred.classes);
  }
  const auto& lp_method = std::get<LpMethod>(method);
  const auto dist = lp::label_propagate(lp::homogenize(graph), train, lp_method.options);
  std::vector<ClassId> out;
  out.reserve(objects.size());
  for (const auto v : objects) out.push_back(dist.predict(v));
  if (uncovered) *uncovered = 0;
  return out;
}

ExperimentReport run_experiment(const HetGraph& graph, const LabelSet& labels, const Method& method,
                                const ExperimentConfig& config) {
  if (config.runs == 0) throw Error(ErrorCode::kInvalidArgument, "runs must be >= 1");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  ExperimentReport report;
  report.method = method_name(method);
  {
    std::ostringstream proto;
    proto << describe(method) << "runs=" << config.runs << ";train_fraction=" << std::setprecision(17)
          << config.train_fraction << ";seed=" << config.seed;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(proto.str())));
    report.fingerprint = buf;
  }
  report.runs.resize(config.runs);

  auto one_run = [&](std::size_t r) {
    const auto t0 = Clock::now();
    const auto run_seed = config.seed + r;
    const auto parts = split(labels, config.train_fraction, run_seed);
    // Only the train side reaches the fitting code.
    std::size_t uncovered = 0;
    const auto predicted =
        fit_predict(graph, parts.train, method, run_seed, parts.test.objects(), &uncovered);
    auto& res = report.runs[r];
    res.run = r;
    res.accuracy = accuracy(parts.test.objects(), predicted, parts.test);
    res.uncovered = uncovered;
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  };

  const auto threads = std::max<std::size_t>(1, std::min(config.threads, config.runs));
  if (threads == 1) {
    for (std::size_t r = 0; r < config.runs; ++r) one_run(r);
  } else {
    std::vector<std::exception_ptr> errors(config.runs);
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < config.runs; r = next++) {
          try {
            one_run(r);
          } catch (...) {
            errors[r] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> acc;
  for (const auto& r : report.runs) acc.push_back(r.accuracy);
  std::tie(report.mean, report.stddev) = mean_std(acc);
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

void ExperimentReport::write_table(std::ostream& out) const {
  out << "method " << method << "  fingerprint " << fingerprint << '\n';
  out << std::setw(5) << "run" << std::setw(12) << "accuracy" << std::setw(12) << "seconds"
      << std::setw(11) << "uncovered" << '\n';
  for (const auto& r : runs)
    out << std::setw(5) << r.run << std::setw(12) << std::fixed << std::setprecision(4) << r.accuracy
        << std::setw(12) << std::setprecision(2) << r.seconds << std::setw(11) << r.uncovered << '\n';
  out << std::fixed << std::setprecision(4) << "mean " << mean << " +- " << stddev << "  ("
      << std::setprecision(2) << wall_seconds << " s)\n";
  out.unsetf(std::ios::floatfield);
}

void ExperimentReport::write_records(std::ostream& out) const {
  const auto prec = out.precision(17);
  for (const auto& r : runs)
    out << "run\t" << method << '\t' << fingerprint << '\t' << r.run << '\t' << r.accuracy << '\t'
        << r.seconds << '\t' << r.uncovered << '\n';
  out << "summary\t" << method << '\t' << fingerprint << '\t' << runs.size() << '\t' << mean << '\t'
      << stddev << '\t' << wall_seconds << '\n';
  out.precision(prec);
}

}  // namespace nep::eval
