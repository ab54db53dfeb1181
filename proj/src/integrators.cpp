#include "trs/integrators.hpp"

#include <algorithm>
#include <cmath>

namespace trs {

bool State::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].dim() != dim()) {
      throw std::invalid_argument("trajectory state " + std::to_string(i) +
                                  " has dimension " + std::to_string(states[i].dim()) +
                                  ", expected " + std::to_string(dim()));
    }
    if (i > 0 && !(states[i].time > states[i - 1].time)) {
      throw std::invalid_argument("trajectory timestamps not strictly increasing at state " +
                                  std::to_string(i));
    }
  }
}

std::string to_string(SolverMethod m) {
  return m == SolverMethod::rk4 ? "rk4" : "leapfrog";
}

SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "rk4") return SolverMethod::rk4;
  if (s == "leapfrog") return SolverMethod::leapfrog;
  throw std::invalid_argument("unknown solver '" + s + "' (expected rk4 or leapfrog)");
}

Tensor shifted_time(const Tensor& t, double c) {
  Tensor out = t;
  for (double& v : out.values()) v += c;
  return out;
}

Tensor time_column(std::size_t rows, double value) { return Tensor(rows, 1, value); }

void check_solver_compatible(SolverMethod method, bool separable, bool autonomous,
                             std::size_t dim) {
  if (method != SolverMethod::leapfrog) return;
  if (!separable) {
    throw std::invalid_argument("leapfrog requires a separable Hamiltonian field");
  }
  if (!autonomous) {
    throw std::invalid_argument("leapfrog is not available for non-autonomous fields");
  }
  if (dim % 2 != 0) {
    throw std::invalid_argument("leapfrog requires an even state dimension, got " +
                                std::to_string(dim));
  }
}

namespace {

// y = x + c * k
Tensor axpy(const Tensor& x, double c, const Tensor& k) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += c * k.data()[i];
  return y;
}

void check_rhs_shape(const Tensor& k, const Tensor& x, const char* what) {
  if (!k.same_shape(x)) {
    throw std::invalid_argument(std::string(what) + " returned " + k.shape_string() +
                                " for input " + x.shape_string());
  }
}

void require_finite(const Tensor& v, const char* stage) {
  if (!v.all_finite()) {
    throw NumericError(std::string("non-finite value in ") + stage, 0);
  }
}

Tensor rk4_unchecked(const VectorField& f, const Tensor& x, const Tensor& t,
                     double dt, bool check) {
  const double half = 0.5 * dt;
  const Tensor t_half = shifted_time(t, half);
  const Tensor k1 = f.rhs(x, t);
  check_rhs_shape(k1, x, "vector field");
  if (check) require_finite(k1, "rk4 stage 1");
  const Tensor k2 = f.rhs(axpy(x, half, k1), t_half);
  if (check) require_finite(k2, "rk4 stage 2");
  const Tensor k3 = f.rhs(axpy(x, half, k2), t_half);
  if (check) require_finite(k3, "rk4 stage 3");
  const Tensor k4 = f.rhs(axpy(x, dt, k3), shifted_time(t, dt));
  if (check) require_finite(k4, "rk4 stage 4");
  Tensor y = x;
  const double sixth = dt / 6.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y.data()[i] += sixth * (k1.data()[i] + 2.0 * k2.data()[i] + 2.0 * k3.data()[i] +
                            k4.data()[i]);
  }
  if (check) require_finite(y, "rk4 update");
  return y;
}

Tensor columns(const Tensor& x, std::size_t begin, std::size_t count) {
  Tensor out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  }
  return out;
}

Tensor leapfrog_unchecked(const VectorField& f, const Tensor& x, const Tensor& t,
                          double dt, bool check) {
  check_solver_compatible(SolverMethod::leapfrog, f.separable(), f.autonomous, x.cols());
  const std::size_t n = x.cols() / 2;
  const Tensor q = columns(x, 0, n);
  const Tensor p = columns(x, n, n);
  const double half = 0.5 * dt;
  const Tensor dv0 = f.potential_grad(q, t);
  check_rhs_shape(dv0, q, "potential gradient");
  const Tensor p_half = axpy(p, -half, dv0);
  const Tensor dk = f.kinetic_grad(p_half, t);
  check_rhs_shape(dk, p_half, "kinetic gradient");
  const Tensor q1 = axpy(q, dt, dk);
  const Tensor p1 = axpy(p_half, -half, f.potential_grad(q1, t));
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      y(r, c) = q1(r, c);
      y(r, n + c) = p1(r, c);
    }
  }
  if (check) require_finite(y, "leapfrog update");
  return y;
}

Tensor step_unchecked(const VectorField& f, const Tensor& x, const Tensor& t,
                      const SolverConfig& config, bool check) {
  if (config.step == 0.0) throw std::invalid_argument("solver step must be non-zero");
  return config.method == SolverMethod::rk4
             ? rk4_unchecked(f, x, t, config.step, check)
             : leapfrog_unchecked(f, x, t, config.step, check);
}

Tensor state_row(const State& s) { return Tensor::row(s.values); }

State row_state(const Tensor& x, double time) {
  return State{std::vector<double>(x.data(), x.data() + x.size()), time};
}

bool row_diverged(std::span<const double> row) {
  return std::any_of(row.begin(), row.end(), [](double v) {
    return !std::isfinite(v) || std::abs(v) > kDivergenceClamp;
  });
}

double clamp_component(double v) {
  if (std::isnan(v)) return kDivergenceClamp;
  return std::clamp(v, -kDivergenceClamp, kDivergenceClamp);
}

}  // namespace

Tensor rk4_step(const VectorField& f, const Tensor& x, const Tensor& t, double dt) {
  if (dt == 0.0) throw std::invalid_argument("rk4 step must be non-zero");
  return rk4_unchecked(f, x, t, dt, true);
}

State rk4_step(const VectorField& f, const State& s, double dt) {
  const Tensor y = rk4_step(f, state_row(s), time_column(1, s.time), dt);
  return row_state(y, s.time + dt);
}

Tensor leapfrog_step(const VectorField& f, const Tensor& x, const Tensor& t, double dt) {
  if (dt == 0.0) throw std::invalid_argument("leapfrog step must be non-zero");
  return leapfrog_unchecked(f, x, t, dt, true);
}

State leapfrog_step(const VectorField& f, const State& s, double dt) {
  const Tensor y = leapfrog_step(f, state_row(s), time_column(1, s.time), dt);
  return row_state(y, s.time + dt);
}

Tensor solve_step(const VectorField& f, const Tensor& x, const Tensor& t,
                  const SolverConfig& config) {
  return step_unchecked(f, x, t, config, true);
}

RolloutResult rollout(const VectorField& f, const State& initial, std::size_t steps,
                      const SolverConfig& config) {
  auto batch = rollout_batch(f, std::span<const State>(&initial, 1), steps, config);
  return std::move(batch.front());
}

std::vector<RolloutResult> rollout_batch(const VectorField& f,
                                         std::span<const State> initial,
                                         std::size_t steps, const SolverConfig& config) {
  if (steps < 1) throw std::invalid_argument("rollout needs at least one step");
  if (config.step == 0.0) throw std::invalid_argument("solver step must be non-zero");
  if (initial.empty()) return {};
  const std::size_t n = initial.size();
  const std::size_t d = initial.front().dim();
  if (d != f.dim) {
    throw std::invalid_argument("initial state dimension " + std::to_string(d) +
                                " does not match field dimension " + std::to_string(f.dim));
  }
  check_solver_compatible(config.method, f.separable(), f.autonomous, d);

  Tensor x(n, d);
  Tensor t(n, 1);
  std::vector<RolloutResult> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (initial[r].dim() != d) throw std::invalid_argument("initial states differ in dimension");
    std::copy(initial[r].values.begin(), initial[r].values.end(), x.row_span(r).begin());
    t(r, 0) = initial[r].time;
    out[r].trajectory.states.reserve(steps + 1);
    out[r].trajectory.states.push_back(initial[r]);
    if (row_diverged(x.row_span(r))) out[r].diverged_at = 0;
  }

  for (std::size_t k = 0; k < steps; ++k) {
    Tensor y = step_unchecked(f, x, t, config, false);
    for (std::size_t r = 0; r < n; ++r) {
      const double time = initial[r].time + static_cast<double>(k + 1) * config.step;
      t(r, 0) = time;
      if (!out[r].diverged_at && row_diverged(y.row_span(r))) {
        out[r].diverged_at = k + 1;
      }
      if (out[r].diverged_at) {
        // Freeze at the last state, clamped.
        auto row = y.row_span(r);
        auto prev = x.row_span(r);
        for (std::size_t c = 0; c < d; ++c) row[c] = clamp_component(prev[c]);
      }
      out[r].trajectory.states.push_back(
          State{std::vector<double>(y.row_span(r).begin(), y.row_span(r).end()), time});
    }
    x = std::move(y);
  }
  return out;
}

// Tape steppers -------------------------------------------------------------

Var rk4_step(const TapeField& f, Var x, const Tensor& t, double dt) {
  if (dt == 0.0) throw std::invalid_argument("rk4 step must be non-zero");
  const double half = 0.5 * dt;
  const Tensor t_half = shifted_time(t, half);
  const Var k1 = f.rhs(x, t);
  const Var k2 = f.rhs(x + ad::scale(k1, half), t_half);
  const Var k3 = f.rhs(x + ad::scale(k2, half), t_half);
  const Var k4 = f.rhs(x + ad::scale(k3, dt), shifted_time(t, dt));
  const Var sum = k1 + ad::scale(k2, 2.0) + ad::scale(k3, 2.0) + k4;
  return x + ad::scale(sum, dt / 6.0);
}

namespace {

Var leapfrog_cached(const TapeField& f, Var x, const Tensor& t, double dt,
                    std::optional<Var>& dv_cache) {
  const std::size_t n = x.cols() / 2;
  const double half = 0.5 * dt;
  const Var q = ad::slice_cols(x, 0, n);
  const Var p = ad::slice_cols(x, n, n);
  const Var dv0 = dv_cache ? *dv_cache : f.potential_grad(q, t);
  const Var p_half = p - ad::scale(dv0, half);
  const Var q1 = q + ad::scale(f.kinetic_grad(p_half, t), dt);
  const Var dv1 = f.potential_grad(q1, t);
  const Var p1 = p_half - ad::scale(dv1, half);
  dv_cache = dv1;
  return ad::concat_cols(q1, p1);
}

}  // namespace

Var leapfrog_step(const TapeField& f, Var x, const Tensor& t, double dt) {
  if (dt == 0.0) throw std::invalid_argument("leapfrog step must be non-zero");
  check_solver_compatible(SolverMethod::leapfrog, f.separable(), f.autonomous, x.cols());
  std::optional<Var> cache;
  return leapfrog_cached(f, x, t, dt, cache);
}

Var solve_step(const TapeField& f, Var x, const Tensor& t, const SolverConfig& config) {
  return config.method == SolverMethod::rk4 ? rk4_step(f, x, t, config.step)
                                            : leapfrog_step(f, x, t, config.step);
}

std::vector<Var> rollout(const TapeField& f, Var x0, const Tensor& t0,
                         std::size_t steps, const SolverConfig& config) {
  if (steps < 1) throw std::invalid_argument("rollout needs at least one step");
  if (config.step == 0.0) throw std::invalid_argument("solver step must be non-zero");
  check_solver_compatible(config.method, f.separable(), f.autonomous, x0.cols());
  std::vector<Var> xs;
  xs.reserve(steps + 1);
  xs.push_back(x0);
  Tensor t = t0;
  std::optional<Var> dv_cache;
  for (std::size_t k = 0; k < steps; ++k) {
    const Var next = config.method == SolverMethod::rk4
                         ? rk4_step(f, xs.back(), t, config.step)
                         : leapfrog_cached(f, xs.back(), t, config.step, dv_cache);
    xs.push_back(next);
    t = shifted_time(t, config.step);
  }
  return xs;
}

}  // namespace trs
