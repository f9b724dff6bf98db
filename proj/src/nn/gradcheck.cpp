#include "nep/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nep/error.hpp"

namespace nep::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<const Coordinate> coordinates, double epsilon,
                                        double floor) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  GradCheckReport report;
  for (const auto& c : coordinates) {
    const double saved = *c.value;
    *c.value = saved + epsilon;
    const double plus = loss();
    *c.value = saved - epsilon;
    const double minus = loss();
    *c.value = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double err = relative_error(c.analytic, numeric, floor);
    ++report.checked;
    if (err > report.max_relative_error || report.checked == 1) {
      report.max_relative_error = err;
      report.worst = c.label;
      report.worst_analytic = c.analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

namespace {

std::vector<std::size_t> pick(std::size_t n, std::size_t max_count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= max_count) return idx;
  for (std::size_t i = 0; i < max_count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(max_count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<Coordinate> collect_coordinates(ParameterStore& params, EmbeddingTable* table,
                                            const Gradients& grads, std::size_t max_per_tensor,
                                            Rng& rng) {
  std::vector<Coordinate> out;
  for (std::uint32_t p = 0; p < params.size(); ++p) {
    const ParamId id{p};
    auto& w = params.value(id);
    const auto* g = grads.find(id);
    for (const auto i : pick(static_cast<std::size_t>(w.size()), max_per_tensor, rng)) {
      const auto k = static_cast<Eigen::Index>(i);
      out.push_back({params.name(id) + "[" + std::to_string(i) + "]", w.data() + k,
                     g ? g->data()[k] : 0.0});
    }
  }
  if (table != nullptr) {
    auto& values = table->values();
    for (std::size_t r = 0; r < table->rows(); ++r) {
      const auto* g = grads.find_row(r);
      for (const auto k : pick(table->dim(), max_per_tensor, rng)) {
        out.push_back({"embedding[" + std::to_string(r) + "][" + std::to_string(k) + "]",
                       &values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)),
                       g ? (*g)(static_cast<Eigen::Index>(k)) : 0.0});
      }
    }
  }
  return out;
}

}  // namespace nep::nn
