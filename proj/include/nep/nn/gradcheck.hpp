#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nep/nn/layers.hpp"
#include "nep/nn/tape.hpp"

namespace nep::nn {

/// One scalar to perturb, paired with its analytic derivative.
struct Coordinate {
  std::string label;
  double* value = nullptr;
  double analytic = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // label of the worst coordinate
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// derivative is ~0 from amplifying rounding noise.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central differences (f(x+e) - f(x-e)) / 2e per coordinate; every value
/// is restored after probing.
GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<const Coordinate> coordinates, double epsilon,
                                        double floor = 1e-6);

/// Coordinates for every dense tensor in `params` (analytic 0 where the
/// gradient is absent) and every embedding row in `table`. Tensors larger
/// than `max_per_tensor` are subsampled.
std::vector<Coordinate> collect_coordinates(ParameterStore& params, EmbeddingTable* table,
                                            const Gradients& grads, std::size_t max_per_tensor,
                                            Rng& rng);

}  // namespace nep::nn
