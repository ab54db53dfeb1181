#include "trs/adam.hpp"

#include <cmath>
#include <string>

namespace trs {

AdamState AdamState::for_params(const ModelParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const Tensor& t : params.tensors) {
    s.first_moment.emplace_back(t.rows(), t.cols());
    s.second_moment.emplace_back(t.rows(), t.cols());
  }
  return s;
}

void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state) {
  const std::size_t n = params.tensors.size();
  if (grads.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw std::invalid_argument("adam_step: expected " + std::to_string(n) +
                                " gradient/moment tensors");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!grads[i].same_shape(params.tensors[i]) ||
        !state.first_moment[i].same_shape(params.tensors[i]) ||
        !state.second_moment[i].same_shape(params.tensors[i])) {
      throw std::invalid_argument("adam_step: shape mismatch at tensor " +
                                  std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(i), i);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    double* p = params.tensors[i].data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    const double* g = grads[i].data();
    for (std::size_t j = 0; j < params.tensors[i].size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace trs
