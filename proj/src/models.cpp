#include "trs/models.hpp"

#include <memory>
#include <stdexcept>

#include "trs/random.hpp"

namespace trs {

std::string to_string(ModelKind k) { return k == ModelKind::oden ? "oden" : "hoden"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "oden") return ModelKind::oden;
  if (s == "hoden") return ModelKind::hoden;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected oden or hoden)");
}

void OdenModel::validate() const {
  spec.validate();
  const std::size_t extra = time_augmented ? 1 : 0;
  if (spec.input_dim != spec.output_dim + extra) {
    throw std::invalid_argument("ODEN input dim " + std::to_string(spec.input_dim) +
                                " does not match state dim " +
                                std::to_string(spec.output_dim) +
                                (time_augmented ? " plus time" : ""));
  }
  check_params(spec, params);
}

void HodenModel::validate() const {
  kinetic_spec.validate();
  potential_spec.validate();
  if (kinetic_spec.output_dim != 1 || potential_spec.output_dim != 1) {
    throw std::invalid_argument("HODEN kinetic and potential nets must be scalar-output");
  }
  if (kinetic_spec.input_dim != potential_spec.input_dim) {
    throw std::invalid_argument("HODEN kinetic and potential nets need equal input dims");
  }
  if (time_augmented && kinetic_spec.input_dim < 2) {
    throw std::invalid_argument("time-augmented HODEN needs input dim >= 2");
  }
  check_params(kinetic_spec, kinetic);
  check_params(potential_spec, potential);
}

void ModelSpec::validate() const {
  if (state_dim == 0) throw std::invalid_argument("model state dim must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("model needs at least one hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden layer width must be >= 1");
  }
  if (kind == ModelKind::hoden && state_dim % 2 != 0) {
    throw std::invalid_argument("HODEN needs an even state dim (q, p halves), got " +
                                std::to_string(state_dim));
  }
}

Model make_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t extra = spec.time_augmented ? 1 : 0;
  if (spec.kind == ModelKind::oden) {
    OdenModel m;
    m.spec = MlpSpec{spec.state_dim + extra, spec.hidden, spec.state_dim, Activation::tanh};
    m.params = init_params(m.spec, stream_seed(seed, 0));
    m.time_augmented = spec.time_augmented;
    return m;
  }
  HodenModel m;
  const std::size_t half = spec.state_dim / 2;
  m.kinetic_spec = MlpSpec{half + extra, spec.hidden, 1, Activation::tanh};
  m.potential_spec = m.kinetic_spec;
  m.kinetic = init_params(m.kinetic_spec, stream_seed(seed, 1));
  m.potential = init_params(m.potential_spec, stream_seed(seed, 2));
  m.time_augmented = spec.time_augmented;
  return m;
}

ModelSpec spec_of(const Model& model) {
  if (const auto* o = std::get_if<OdenModel>(&model)) {
    return ModelSpec{ModelKind::oden, o->state_dim(), o->spec.hidden_dims, o->time_augmented};
  }
  const auto& h = std::get<HodenModel>(model);
  return ModelSpec{ModelKind::hoden, h.state_dim(), h.kinetic_spec.hidden_dims,
                   h.time_augmented};
}

ModelKind kind_of(const Model& model) {
  return std::holds_alternative<OdenModel>(model) ? ModelKind::oden : ModelKind::hoden;
}

std::size_t state_dim(const Model& model) {
  return std::visit([](const auto& m) { return m.state_dim(); }, model);
}

bool time_augmented(const Model& model) {
  return std::visit([](const auto& m) { return m.time_augmented; }, model);
}

void validate_model(const Model& model) {
  std::visit([](const auto& m) { m.validate(); }, model);
}

ModelParams flat_params(const Model& model) {
  if (const auto* o = std::get_if<OdenModel>(&model)) return o->params;
  const auto& h = std::get<HodenModel>(model);
  ModelParams out = h.kinetic;
  out.tensors.insert(out.tensors.end(), h.potential.tensors.begin(), h.potential.tensors.end());
  return out;
}

void set_flat_params(Model& model, ModelParams params) {
  if (auto* o = std::get_if<OdenModel>(&model)) {
    check_params(o->spec, params);
    o->params = std::move(params);
    return;
  }
  auto& h = std::get<HodenModel>(model);
  const std::size_t nk = 2 * h.kinetic_spec.layer_count();
  if (params.tensors.size() != nk + 2 * h.potential_spec.layer_count()) {
    throw std::invalid_argument("HODEN parameter list has " +
                                std::to_string(params.tensors.size()) + " tensors");
  }
  ModelParams k, v;
  k.tensors.assign(std::make_move_iterator(params.tensors.begin()),
                   std::make_move_iterator(params.tensors.begin() + static_cast<std::ptrdiff_t>(nk)));
  v.tensors.assign(std::make_move_iterator(params.tensors.begin() + static_cast<std::ptrdiff_t>(nk)),
                   std::make_move_iterator(params.tensors.end()));
  check_params(h.kinetic_spec, k);
  check_params(h.potential_spec, v);
  h.kinetic = std::move(k);
  h.potential = std::move(v);
}

namespace {

Var with_time(Tape& tape, Var x, const Tensor& t, bool augmented) {
  if (!augmented) return x;
  return ad::concat_cols(x, tape.constant(t));
}

Tensor concat_time(const Tensor& x, const Tensor& t) {
  Tensor out(x.rows(), x.cols() + 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c);
    out(r, x.cols()) = t(r, 0);
  }
  return out;
}

// d(net)/d(first `dim` inputs), built on `tape`.
Var net_gradient(const MlpSpec& spec, const BoundParams& bound, Tape& tape, Var x,
                 const Tensor& t, bool augmented) {
  const Var g = mlp_input_gradient(spec, bound, with_time(tape, x, t, augmented));
  return augmented ? ad::slice_cols(g, 0, x.cols()) : g;
}

}  // namespace

TapeField oden_tape_field(const OdenModel& model, Tape& tape, const BoundParams& params) {
  TapeField f;
  f.dim = model.state_dim();
  f.autonomous = !model.time_augmented;
  f.rhs = [spec = model.spec, params, aug = model.time_augmented, &tape](Var x, const Tensor& t) {
    if (x.cols() != spec.output_dim) {
      throw std::invalid_argument("ODEN field: state has " + std::to_string(x.cols()) +
                                  " columns, model expects " + std::to_string(spec.output_dim));
    }
    return mlp_forward(spec, params, with_time(tape, x, t, aug));
  };
  return f;
}

TapeField hoden_tape_field(const HodenModel& model, Tape& tape, const BoundParams& kinetic,
                           const BoundParams& potential) {
  TapeField f;
  const std::size_t half = model.half_dim();
  f.dim = 2 * half;
  f.autonomous = !model.time_augmented;
  const bool aug = model.time_augmented;
  f.kinetic_grad = [spec = model.kinetic_spec, kinetic, aug, &tape](Var p, const Tensor& t) {
    return net_gradient(spec, kinetic, tape, p, t, aug);
  };
  f.potential_grad = [spec = model.potential_spec, potential, aug, &tape](Var q,
                                                                          const Tensor& t) {
    return net_gradient(spec, potential, tape, q, t, aug);
  };
  f.rhs = [half, dk = f.kinetic_grad, dv = f.potential_grad](Var x, const Tensor& t) {
    if (x.cols() != 2 * half) {
      throw std::invalid_argument("HODEN field: state has " + std::to_string(x.cols()) +
                                  " columns, model expects " + std::to_string(2 * half));
    }
    const Var q = ad::slice_cols(x, 0, half);
    const Var p = ad::slice_cols(x, half, half);
    return ad::concat_cols(dk(p, t), -dv(q, t));
  };
  return f;
}

BoundModel bind_model(const Model& model, Tape& tape, bool trainable) {
  auto bind = [&](const ModelParams& p) {
    return trainable ? bind_variables(tape, p) : bind_constants(tape, p);
  };
  BoundModel out;
  if (const auto* o = std::get_if<OdenModel>(&model)) {
    out.params = bind(o->params);
    out.field = oden_tape_field(*o, tape, out.params);
    return out;
  }
  const auto& h = std::get<HodenModel>(model);
  const BoundParams k = bind(h.kinetic);
  const BoundParams v = bind(h.potential);
  out.field = hoden_tape_field(h, tape, k, v);
  out.params.vars = k.vars;
  out.params.vars.insert(out.params.vars.end(), v.vars.begin(), v.vars.end());
  return out;
}

VectorField oden_field(const OdenModel& model) {
  model.validate();
  auto m = std::make_shared<const OdenModel>(model);
  VectorField f;
  f.dim = m->state_dim();
  f.autonomous = !m->time_augmented;
  f.rhs = [m](const Tensor& x, const Tensor& t) {
    if (x.cols() != m->state_dim()) {
      throw std::invalid_argument("ODEN field: state has " + std::to_string(x.cols()) +
                                  " columns, model expects " + std::to_string(m->state_dim()));
    }
    return mlp_forward(m->spec, m->params, m->time_augmented ? concat_time(x, t) : x);
  };
  return f;
}

namespace {

Tensor numeric_net_gradient(const MlpSpec& spec, const ModelParams& params, const Tensor& x,
                            const Tensor& t, bool augmented) {
  Tape tape(false);
  const BoundParams bound = bind_constants(tape, params);
  const Var input = tape.constant(x);
  return net_gradient(spec, bound, tape, input, t, augmented).value();
}

}  // namespace

VectorField hoden_field(const HodenModel& model) {
  model.validate();
  auto m = std::make_shared<const HodenModel>(model);
  VectorField f;
  const std::size_t half = m->half_dim();
  f.dim = 2 * half;
  f.autonomous = !m->time_augmented;
  f.kinetic_grad = [m](const Tensor& p, const Tensor& t) {
    return numeric_net_gradient(m->kinetic_spec, m->kinetic, p, t, m->time_augmented);
  };
  f.potential_grad = [m](const Tensor& q, const Tensor& t) {
    return numeric_net_gradient(m->potential_spec, m->potential, q, t, m->time_augmented);
  };
  f.rhs = [half, dk = f.kinetic_grad, dv = f.potential_grad](const Tensor& x, const Tensor& t) {
    if (x.cols() != 2 * half) {
      throw std::invalid_argument("HODEN field: state has " + std::to_string(x.cols()) +
                                  " columns, model expects " + std::to_string(2 * half));
    }
    Tensor q(x.rows(), half), p(x.rows(), half);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < half; ++c) {
        q(r, c) = x(r, c);
        p(r, c) = x(r, half + c);
      }
    }
    const Tensor gk = dk(p, t);
    const Tensor gv = dv(q, t);
    Tensor out(x.rows(), 2 * half);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < half; ++c) {
        out(r, c) = gk(r, c);
        out(r, half + c) = -gv(r, c);
      }
    }
    return out;
  };
  return f;
}

VectorField model_field(const Model& model) {
  if (const auto* o = std::get_if<OdenModel>(&model)) return oden_field(*o);
  return hoden_field(std::get<HodenModel>(model));
}

double hoden_energy(const HodenModel& model, const State& state, bool calibrate) {
  const std::size_t half = model.half_dim();
  if (state.dim() != 2 * half) {
    throw std::invalid_argument("hoden_energy: state dim " + std::to_string(state.dim()) +
                                " != " + std::to_string(2 * half));
  }
  const std::size_t in = model.kinetic_spec.input_dim;
  auto eval = [&](const MlpSpec& spec, const ModelParams& params, const double* v) {
    Tensor x(1, in);
    for (std::size_t c = 0; c < half; ++c) x(0, c) = v ? v[c] : 0.0;
    if (model.time_augmented) x(0, half) = state.time;
    return mlp_forward(spec, params, x).item();
  };
  const double* q = state.values.data();
  const double* p = state.values.data() + half;
  double h = eval(model.kinetic_spec, model.kinetic, p) +
             eval(model.potential_spec, model.potential, q);
  if (calibrate) {
    h -= eval(model.kinetic_spec, model.kinetic, nullptr) +
         eval(model.potential_spec, model.potential, nullptr);
  }
  return h;
}

}  // namespace trs
