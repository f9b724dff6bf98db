#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "nep/nn/layers.hpp"
#include "nep/nn/tape.hpp"

namespace nep::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with lazy sparse rows: dense tensors and embedding rows absent
/// from the gradient collection are left untouched, including their
/// moment estimates. Each embedding row keeps its own step count for bias
/// correction.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Throws kNumerical (naming the offending tensor) on non-finite input.
  void step(ParameterStore& params, EmbeddingTable* table, const Gradients& grads);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }

 private:
  struct Moments {
    Matrix m, v;
    std::uint64_t t = 0;
  };

  AdamConfig config_;
  std::map<ParamId, Moments> dense_;
  Matrix row_m_, row_v_;
  std::vector<std::uint32_t> row_t_;
  std::uint64_t steps_ = 0;
};

}  // namespace nep::nn
