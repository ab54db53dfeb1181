#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trs/autodiff.hpp"
#include "trs/tensor.hpp"

namespace trs {

enum class Activation { tanh };

// Fully connected net: input -> hidden... (tanh) -> output (linear).
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::tanh;

  // Throws std::invalid_argument when any dimension is zero.
  void validate() const;
  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  std::size_t parameter_count() const;
  bool operator==(const MlpSpec&) const = default;
};

// Per layer l: weight [in_l x out_l] at 2l, bias [1 x out_l] at 2l+1.
struct ModelParams {
  std::vector<Tensor> tensors;

  std::size_t scalar_count() const;
  bool all_finite() const;
  bool operator==(const ModelParams&) const = default;
};

// Throws if the tensors do not match the layout of `spec`.
void check_params(const MlpSpec& spec, const ModelParams& params);

// Glorot-uniform weights, zero biases.
ModelParams init_params(const MlpSpec& spec, std::uint64_t seed);
ModelParams zero_params(const MlpSpec& spec);

// Parameters placed on a tape, in the same order as ModelParams::tensors.
struct BoundParams {
  std::vector<Var> vars;
};

BoundParams bind_variables(Tape& tape, const ModelParams& params);
BoundParams bind_constants(Tape& tape, const ModelParams& params);

// Gradients of the bound variables after Tape::backward, in parameter order.
// Parameters the output did not depend on get zero tensors.
std::vector<Tensor> collect_grads(const Tape& tape, const BoundParams& bound,
                                  const ModelParams& like);

// Records the forward pass on the tape; input is [batch x input_dim].
Var mlp_forward(const MlpSpec& spec, const BoundParams& params, Var input);

// Non-recording forward pass.
Tensor mlp_forward(const MlpSpec& spec, const ModelParams& params,
                   const Tensor& input);

// Gradient of a scalar-output net with respect to its input, built from tape
// ops (transposed weights and tanh derivatives) so that it can itself be
// differentiated with respect to the parameters. Result is
// [batch x input_dim]. Requires spec.output_dim == 1.
Var mlp_input_gradient(const MlpSpec& spec, const BoundParams& params, Var input);

}  // namespace trs
