#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trs/mlp.hpp"

namespace trs {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Zeroed moments shaped like `params`.
  static AdamState for_params(const ModelParams& params, double learning_rate);
};

// One bias-corrected Adam update in place. Throws std::invalid_argument on a
// shape mismatch and NumericError on a non-finite gradient; on error neither
// params nor state are modified.
void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state);

}  // namespace trs
