#include "trs/mlp.hpp"

#include <cmath>
#include <string>

#include "trs/random.hpp"

namespace trs {

void MlpSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("MlpSpec: input_dim must be >= 1");
  if (output_dim == 0) throw std::invalid_argument("MlpSpec: output_dim must be >= 1");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
  }
}

namespace {

std::size_t layer_in(const MlpSpec& spec, std::size_t l) {
  return l == 0 ? spec.input_dim : spec.hidden_dims[l - 1];
}

std::size_t layer_out(const MlpSpec& spec, std::size_t l) {
  return l == spec.hidden_dims.size() ? spec.output_dim : spec.hidden_dims[l];
}

}  // namespace

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    n += (layer_in(*this, l) + 1) * layer_out(*this, l);
  }
  return n;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const Tensor& t : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void check_params(const MlpSpec& spec, const ModelParams& params) {
  spec.validate();
  if (params.tensors.size() != 2 * spec.layer_count()) {
    throw std::invalid_argument("expected " + std::to_string(2 * spec.layer_count()) +
                                " parameter tensors, got " +
                                std::to_string(params.tensors.size()));
  }
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = params.tensors[2 * l];
    const Tensor& b = params.tensors[2 * l + 1];
    if (w.rows() != layer_in(spec, l) || w.cols() != layer_out(spec, l) ||
        b.rows() != 1 || b.cols() != layer_out(spec, l)) {
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " parameter shapes " + w.shape_string() + ", " +
                                  b.shape_string() + " do not match spec");
    }
  }
}

ModelParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ModelParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = layer_in(spec, l);
    const std::size_t out = layer_out(spec, l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w(in, out);
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    p.tensors.push_back(std::move(w));
    p.tensors.emplace_back(1, out);
  }
  return p;
}

ModelParams zero_params(const MlpSpec& spec) {
  spec.validate();
  ModelParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    p.tensors.emplace_back(layer_in(spec, l), layer_out(spec, l));
    p.tensors.emplace_back(1, layer_out(spec, l));
  }
  return p;
}

BoundParams bind_variables(Tape& tape, const ModelParams& params) {
  BoundParams b;
  b.vars.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) b.vars.push_back(tape.variable(t));
  return b;
}

BoundParams bind_constants(Tape& tape, const ModelParams& params) {
  BoundParams b;
  b.vars.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) b.vars.push_back(tape.constant(t));
  return b;
}

std::vector<Tensor> collect_grads(const Tape& tape, const BoundParams& bound,
                                  const ModelParams& like) {
  std::vector<Tensor> grads;
  grads.reserve(bound.vars.size());
  for (std::size_t i = 0; i < bound.vars.size(); ++i) {
    const Tensor& g = tape.grad(bound.vars[i]);
    if (g.size() == 0) {
      grads.emplace_back(like.tensors[i].rows(), like.tensors[i].cols());
    } else {
      grads.push_back(g);
    }
  }
  return grads;
}

namespace {

void check_input(const MlpSpec& spec, std::size_t bound_count, std::size_t cols) {
  spec.validate();
  if (bound_count != 2 * spec.layer_count()) {
    throw std::invalid_argument("bound parameter count does not match MlpSpec");
  }
  if (cols != spec.input_dim) {
    throw std::invalid_argument("mlp input has " + std::to_string(cols) +
                                " columns, spec expects " +
                                std::to_string(spec.input_dim));
  }
}

}  // namespace

Var mlp_forward(const MlpSpec& spec, const BoundParams& params, Var input) {
  check_input(spec, params.vars.size(), input.cols());
  Var h = input;
  const std::size_t hidden = spec.hidden_dims.size();
  for (std::size_t l = 0; l <= hidden; ++l) {
    h = ad::add_row(ad::matmul(h, params.vars[2 * l]), params.vars[2 * l + 1]);
    if (l < hidden) h = ad::tanh(h);
  }
  return h;
}

Tensor mlp_forward(const MlpSpec& spec, const ModelParams& params,
                   const Tensor& input) {
  check_input(spec, params.tensors.size(), input.cols());
  Tensor h = input;
  const std::size_t hidden = spec.hidden_dims.size();
  for (std::size_t l = 0; l <= hidden; ++l) {
    h = tensor_ops::matmul(h, params.tensors[2 * l]);
    const Tensor& b = params.tensors[2 * l + 1];
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) += b(0, c);
    }
    if (l < hidden) tensor_ops::tanh_inplace(h);
    if (!h.all_finite()) {
      throw NumericError("non-finite activation in layer " + std::to_string(l), l);
    }
  }
  return h;
}

Var mlp_input_gradient(const MlpSpec& spec, const BoundParams& params, Var input) {
  if (spec.output_dim != 1) {
    throw std::invalid_argument("mlp_input_gradient needs a scalar-output net, got output_dim " +
                                std::to_string(spec.output_dim));
  }
  check_input(spec, params.vars.size(), input.cols());
  const std::size_t hidden = spec.hidden_dims.size();

  // Forward activations a_1..a_L.
  std::vector<Var> acts;
  Var h = input;
  for (std::size_t l = 0; l < hidden; ++l) {
    h = ad::tanh(ad::add_row(ad::matmul(h, params.vars[2 * l]), params.vars[2 * l + 1]));
    acts.push_back(h);
  }

  // Output weight is [h_L x 1]; its transpose seeds dOut/da_L for every row.
  Var w_out_row = ad::transpose(params.vars[2 * hidden]);
  if (hidden == 0) {
    // Linear net: gradient is the weight itself for every sample.
    Var ones = input.tape->constant(Tensor(input.rows(), 1, 1.0));
    return ad::matmul(ones, w_out_row);
  }
  Var g = ad::mul_row(ad::one_minus_square(acts[hidden - 1]), w_out_row);
  for (std::size_t l = hidden; l-- > 0;) {
    g = ad::matmul_nt(g, params.vars[2 * l]);
    if (l > 0) g = ad::mul(g, ad::one_minus_square(acts[l - 1]));
  }
  return g;
}

}  // namespace trs
