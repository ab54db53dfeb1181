#pragma once

// Independent brute-force references used by the unit and acceptance tests.
// Everything here works on plain std::vector<double> with explicit loops: its
// own MLP forward pass and hand-written input gradient, its own steppers and
// its own loss and metric formulas. The only things shared with the library
// are parameter layouts and the random model initialisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "trs/dynamics.hpp"
#include "trs/losses.hpp"
#include "trs/metrics.hpp"
#include "trs/models.hpp"
#include "trs/random.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Fn = std::function<Vec(const Vec& x, double t)>;

// Forward pass with stored activations; out = last layer.
struct MlpTrace {
  std::vector<Vec> act;  // act[0] = input, act[l] = tanh output of hidden l
  Vec out;
};

inline MlpTrace mlp_trace(const trs::MlpSpec& spec, const trs::ModelParams& p, const Vec& in) {
  MlpTrace tr;
  tr.act.push_back(in);
  const std::size_t layers = spec.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const trs::Tensor& w = p.tensors[2 * l];
    const trs::Tensor& b = p.tensors[2 * l + 1];
    const Vec& a = tr.act.back();
    Vec z(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = b(0, j);
      for (std::size_t i = 0; i < w.rows(); ++i) s += a[i] * w(i, j);
      z[j] = s;
    }
    if (l + 1 == layers) {
      tr.out = z;
    } else {
      for (double& v : z) v = std::tanh(v);
      tr.act.push_back(z);
    }
  }
  return tr;
}

inline Vec mlp(const trs::MlpSpec& spec, const trs::ModelParams& p, const Vec& in) {
  return mlp_trace(spec, p, in).out;
}

// d(scalar output)/d(input) by manual backpropagation.
inline Vec mlp_input_grad(const trs::MlpSpec& spec, const trs::ModelParams& p, const Vec& in) {
  const MlpTrace tr = mlp_trace(spec, p, in);
  const std::size_t layers = spec.layer_count();
  Vec g = {1.0};
  for (std::size_t l = layers; l-- > 0;) {
    const trs::Tensor& w = p.tensors[2 * l];
    if (l + 1 < layers) {
      const Vec& h = tr.act[l + 1];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= 1.0 - h[j] * h[j];
    }
    Vec prev(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) prev[i] += w(i, j) * g[j];
    }
    g = prev;
  }
  return g;
}

inline Vec with_time(Vec v, bool time_aug, double t) {
  if (time_aug) v.push_back(t);
  return v;
}

inline Fn model_fn(const trs::Model& model) {
  if (const auto* o = std::get_if<trs::OdenModel>(&model)) {
    return [o = *o](const Vec& x, double t) {
      return mlp(o.spec, o.params, with_time(x, o.time_augmented, t));
    };
  }
  const auto& h = std::get<trs::HodenModel>(model);
  return [h](const Vec& x, double t) {
    const std::size_t d = h.half_dim();
    const Vec q(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
    const Vec p(x.begin() + static_cast<std::ptrdiff_t>(d), x.end());
    const Vec dk = mlp_input_grad(h.kinetic_spec, h.kinetic, with_time(p, h.time_augmented, t));
    const Vec dv = mlp_input_grad(h.potential_spec, h.potential, with_time(q, h.time_augmented, t));
    Vec out(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = dk[i];
      out[d + i] = -dv[i];
    }
    return out;
  };
}

// Driven, damped Duffing written out directly.
inline Fn duffing_fn(double alpha, double beta, double gamma, double delta) {
  return [=](const Vec& x, double t) {
    return Vec{x[1], -alpha * x[0] - beta * x[0] * x[0] * x[0] - gamma * x[1] + delta * std::cos(t)};
  };
}

inline Fn attractor_fn() {
  return [](const Vec& x, double) {
    return Vec{1.0 + x[1] * x[2], -x[0] * x[2], x[1] * x[1] + 2.0 * x[1] * x[2]};
  };
}

inline Vec axpy(const Vec& x, double a, const Vec& k) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + a * k[i];
  return r;
}

inline Vec rk4(const Fn& f, const Vec& x, double t, double h) {
  const Vec k1 = f(x, t);
  const Vec k2 = f(axpy(x, h / 2, k1), t + h / 2);
  const Vec k3 = f(axpy(x, h / 2, k2), t + h / 2);
  const Vec k4 = f(axpy(x, h, k3), t + h);
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return r;
}

// Kick-drift-kick using the full field (its halves are dq/dt and dp/dt).
inline Vec leapfrog(const Fn& f, const Vec& x, double t, double h) {
  const std::size_t d = x.size() / 2;
  Vec y = x;
  Vec a = f(y, t);
  for (std::size_t i = 0; i < d; ++i) y[d + i] += h / 2 * a[d + i];
  a = f(y, t);
  for (std::size_t i = 0; i < d; ++i) y[i] += h * a[i];
  a = f(y, t);
  for (std::size_t i = 0; i < d; ++i) y[d + i] += h / 2 * a[d + i];
  return y;
}

inline Vec step(const Fn& f, const Vec& x, double t, double h, trs::SolverMethod m) {
  return m == trs::SolverMethod::rk4 ? rk4(f, x, t, h) : leapfrog(f, x, t, h);
}

inline Vec reverse(const Vec& signs, const Vec& x) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = signs[i] * x[i];
  return r;
}

inline double sqdist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Per-step weighted symmetry residuals for one sample: w(i) * |R f_i - b_i|^2.
inline double trs_sample(const Fn& f, const Vec& x0, double t0, std::size_t steps,
                         const Vec& signs, double a, double h, trs::SolverMethod m,
                         const std::function<double(std::size_t)>& w) {
  Vec fwd = x0, bwd = reverse(signs, x0);
  double tf = t0, tb = -t0 + a, sum = 0.0;
  for (std::size_t i = 1; i <= steps; ++i) {
    fwd = step(f, fwd, tf, h, m);
    bwd = step(f, bwd, tb, -h, m);
    tf = t0 + static_cast<double>(i) * h;
    tb = -t0 + a - static_cast<double>(i) * h;
    sum += w(i - 1) * sqdist(reverse(signs, fwd), bwd);
  }
  return sum;
}

inline double trs_loss(const Fn& f, const std::vector<Vec>& x0, const Vec& t0, std::size_t steps,
                       const Vec& signs, double a, double h, trs::SolverMethod m) {
  double s = 0.0;
  for (std::size_t r = 0; r < x0.size(); ++r) {
    s += trs_sample(f, x0[r], t0[r], steps, signs, a, h, m, [](std::size_t) { return 1.0; });
  }
  return s / static_cast<double>(x0.size());
}

// Data term plus lambda(t_i)-weighted symmetry term, both averaged over rows.
inline double combined_loss(const Fn& f, const std::vector<trs::Trajectory>& segs,
                            const Vec& signs, double a, double h, trs::SolverMethod m,
                            const trs::LambdaSchedule& lam, double t_min, double t_max) {
  double ode = 0.0, sym = 0.0;
  for (const trs::Trajectory& s : segs) {
    const double t0 = s.states.front().time;
    Vec x = s.states.front().values;
    for (std::size_t i = 1; i < s.size(); ++i) {
      x = step(f, x, t0 + static_cast<double>(i - 1) * h, h, m);
      ode += sqdist(x, s.states[i].values);
    }
    auto w = [&](std::size_t i) {
      const double ti = t0 + static_cast<double>(i) * h;
      if (lam.kind == trs::LambdaSchedule::Kind::constant) return lam.coefficient;
      return lam.coefficient * (ti - t_min) / (t_max - t_min);
    };
    if (lam.coefficient != 0.0) {
      sym += trs_sample(f, s.states.front().values, t0, s.size() - 1, signs, a, h, m, w);
    }
  }
  return (ode + sym) / static_cast<double>(segs.size());
}

inline double trajectory_mse(const std::vector<trs::Trajectory>& pred,
                             const std::vector<trs::Trajectory>& truth) {
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pred[k].size(); ++i) {
      for (std::size_t c = 0; c < pred[k].dim(); ++c) {
        const double d = pred[k].states[i].values[c] - truth[k].states[i].values[c];
        s += d * d;
        ++count;
      }
    }
    total += s / static_cast<double>(count);
  }
  return total / static_cast<double>(pred.size());
}

inline double energy_mse(const std::vector<trs::Trajectory>& pred,
                         const std::vector<trs::Trajectory>& truth,
                         const std::function<double(const Vec&)>& energy) {
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred[k].size(); ++i) {
      const double d = energy(pred[k].states[i].values) - energy(truth[k].states[i].values);
      s += d * d;
    }
    total += s / static_cast<double>(pred[k].size());
  }
  return total / static_cast<double>(pred.size());
}

inline double forward_backward(const Fn& f, const std::vector<trs::State>& init,
                               std::size_t steps, const Vec& signs, double a, double h,
                               trs::SolverMethod m) {
  double num = 0.0, den = 0.0;
  for (const trs::State& s : init) {
    Vec fwd = s.values, bwd = reverse(signs, s.values);
    for (std::size_t i = 1; i <= steps; ++i) {
      fwd = step(f, fwd, s.time + static_cast<double>(i - 1) * h, h, m);
      bwd = step(f, bwd, -s.time + a - static_cast<double>(i - 1) * h, -h, m);
      const Vec rf = reverse(signs, fwd);
      num += sqdist(rf, bwd);
      den += sqdist(rf, Vec(rf.size(), 0.0));
    }
  }
  return std::sqrt(num) / std::sqrt(den);
}

// Random uniform-grid segments with arbitrary observed states.
inline std::vector<trs::Trajectory> random_segments(trs::Rng& rng, std::size_t count,
                                                    std::size_t length, std::size_t dim,
                                                    double dt) {
  std::vector<trs::Trajectory> out;
  for (std::size_t k = 0; k < count; ++k) {
    trs::Trajectory t;
    const double t0 = rng.uniform(0.0, 3.0);
    for (std::size_t i = 0; i < length; ++i) {
      trs::State s;
      s.time = t0 + static_cast<double>(i) * dt;
      for (std::size_t c = 0; c < dim; ++c) s.values.push_back(rng.normal());
      t.states.push_back(s);
    }
    out.push_back(t);
  }
  return out;
}

// Gradient check of the combined objective ------------------------------------

struct GradientCase {
  trs::ModelKind kind = trs::ModelKind::oden;
  trs::SolverMethod solver = trs::SolverMethod::rk4;
  bool time_augmented = false;
  std::size_t state_dim = 2;
  std::vector<std::size_t> hidden = {8};
  trs::LambdaSchedule lambda{trs::LambdaSchedule::Kind::constant, 1.0};
  std::uint64_t seed = 0;
  double dt = 0.1;
  std::size_t segments = 3;
  std::size_t length = 5;
};

inline double library_loss(const trs::Model& m, const trs::SegmentBatch& batch,
                           const GradientCase& gc, const trs::TimeRange& range,
                           std::vector<trs::Tensor>* grads) {
  trs::Tape tape;
  const trs::BoundModel bm = trs::bind_model(m, tape, grads != nullptr);
  const trs::ReversingOperator op = gc.state_dim % 2 == 0
                                        ? trs::ReversingOperator::momentum_flip(gc.state_dim, 0.3)
                                        : trs::ReversingOperator::full_negation(gc.state_dim, 0.3);
  const trs::LossTerms lt = trs::combined_loss(bm.field, tape, batch, op, gc.lambda,
                                               {gc.solver, gc.dt}, range);
  if (grads) {
    tape.backward(lt.total);
    *grads = trs::collect_grads(tape, bm.params, trs::flat_params(m));
  }
  return lt.total.value().item();
}

// max |ad - fd| / max(|fd|_inf, 1e-12) with central differences.
inline double gradient_relative_error(const GradientCase& gc, double h = 1e-6) {
  trs::Rng rng(gc.seed);
  const trs::Model model = trs::make_model(
      trs::ModelSpec{gc.kind, gc.state_dim, gc.hidden, gc.time_augmented}, rng.next());
  const auto segs = random_segments(rng, gc.segments, gc.length, gc.state_dim, gc.dt);
  const trs::SegmentBatch batch = trs::make_segment_batch(segs);
  const trs::TimeRange range{0.0, 3.0 + static_cast<double>(gc.length) * gc.dt};

  std::vector<trs::Tensor> ad;
  library_loss(model, batch, gc, range, &ad);

  trs::ModelParams base = trs::flat_params(model);
  double max_diff = 0.0, max_fd = 0.0;
  for (std::size_t k = 0; k < base.tensors.size(); ++k) {
    for (std::size_t j = 0; j < base.tensors[k].size(); ++j) {
      auto eval = [&](double delta) {
        trs::ModelParams p = base;
        p.tensors[k].values()[j] += delta;
        trs::Model m = model;
        trs::set_flat_params(m, p);
        return library_loss(m, batch, gc, range, nullptr);
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      max_diff = std::max(max_diff, std::abs(ad[k].values()[j] - fd));
      max_fd = std::max(max_fd, std::abs(fd));
    }
  }
  return max_diff / std::max(max_fd, 1e-12);
}

// Library vs oracle on random models and data ----------------------------------

struct EquivalenceReport {
  double trs = 0.0;
  double trs_nonauto = 0.0;
  double combined = 0.0;
  double trajectory_mse = 0.0;
  double energy_mse = 0.0;
  double forward_backward = 0.0;

  double max() const {
    return std::max({trs, trs_nonauto, combined, trajectory_mse, energy_mse, forward_backward});
  }
};

inline double rel_dev(double lib, double ref) {
  return std::abs(lib - ref) / std::max(1.0, std::abs(ref));
}

inline std::vector<trs::State> random_states(trs::Rng& rng, std::size_t n, std::size_t dim,
                                             double t_scale) {
  std::vector<trs::State> out(n);
  for (auto& s : out) {
    for (std::size_t c = 0; c < dim; ++c) s.values.push_back(rng.normal());
    s.time = rng.uniform(0.0, t_scale);
  }
  return out;
}

inline trs::Tensor rows_of(const std::vector<trs::State>& s) {
  trs::Tensor x(s.size(), s.front().dim());
  for (std::size_t r = 0; r < s.size(); ++r) {
    for (std::size_t c = 0; c < s[r].dim(); ++c) x(r, c) = s[r].values[c];
  }
  return x;
}

inline trs::Tensor times_of(const std::vector<trs::State>& s) {
  trs::Tensor t(s.size(), 1);
  for (std::size_t r = 0; r < s.size(); ++r) t(r, 0) = s[r].time;
  return t;
}

inline EquivalenceReport run_equivalence_suite(std::uint64_t seed, std::size_t trials) {
  using namespace trs;
  EquivalenceReport rep;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(stream_seed(seed, 0, trial));
    const bool hoden = trial % 2 == 1;
    const std::size_t dim = hoden ? 2 * (1 + trial % 2) : 2 + trial % 2;
    const SolverMethod method =
        hoden && trial % 4 == 1 ? SolverMethod::leapfrog : SolverMethod::rk4;
    const double h = rng.uniform(0.02, 0.2);
    const std::size_t steps = 3 + rng.next() % 8;
    const std::vector<std::size_t> hidden = {4 + rng.next() % 12};
    const Vec signs = [&] {
      Vec s(dim, 1.0);
      for (std::size_t i = dim / 2; i < dim; ++i) s[i] = -1.0;
      return s;
    }();
    const double a = rng.uniform(-1.0, 1.0);
    const ReversingOperator op = ReversingOperator::custom(signs, a);

    // Autonomous symmetry loss.
    const Model m = make_model(ModelSpec{hoden ? ModelKind::hoden : ModelKind::oden, dim, hidden,
                                         false},
                               rng.next());
    const auto x0 = random_states(rng, 4, dim, 2.0);
    {
      Tape tape;
      const BoundModel bm = bind_model(m, tape, false);
      const Var l = trs_loss(bm.field, tape.constant(rows_of(x0)), times_of(x0), steps, op,
                             {method, h});
      std::vector<Vec> xs;
      Vec ts;
      for (const State& s : x0) {
        xs.push_back(s.values);
        ts.push_back(s.time);
      }
      const double ref = trs_loss(model_fn(m), xs, ts, steps, signs, a, h, method);
      rep.trs = std::max(rep.trs, rel_dev(l.value().item(), ref));
    }

    // Non-autonomous symmetry loss: time-augmented model and the driven system.
    {
      const Model mt = make_model(ModelSpec{hoden ? ModelKind::hoden : ModelKind::oden, dim,
                                            hidden, true},
                                  rng.next());
      SystemSpec driven;
      driven.duffing = {rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.3),
                        rng.uniform(0.1, 0.5)};
      const auto xd = random_states(rng, 4, 2, 2.0);
      for (int which = 0; which < 2; ++which) {
        Tape tape;
        std::optional<BoundModel> bm;
        TapeField tf;
        Fn fn;
        Vec sg = signs;
        const std::vector<State>* xs0 = &x0;
        if (which == 0) {
          bm = bind_model(mt, tape, false);
          tf = bm->field;
          fn = model_fn(mt);
        } else {
          tf = system_tape_field(driven, tape);
          fn = duffing_fn(driven.duffing.alpha, driven.duffing.beta, driven.duffing.gamma,
                          driven.duffing.delta);
          sg = {1.0, -1.0};
          xs0 = &xd;
        }
        const ReversingOperator opn = ReversingOperator::custom(sg, a);
        const Var l = trs_loss_nonautonomous(tf, tape.constant(rows_of(*xs0)), times_of(*xs0),
                                             steps, opn, {SolverMethod::rk4, h});
        std::vector<Vec> xs;
        Vec ts;
        for (const State& s : *xs0) {
          xs.push_back(s.values);
          ts.push_back(s.time);
        }
        const double ref = trs_loss(fn, xs, ts, steps, sg, a, h, SolverMethod::rk4);
        rep.trs_nonauto = std::max(rep.trs_nonauto, rel_dev(l.value().item(), ref));
      }
    }

    // Combined objective on random segments.
    {
      const auto segs = random_segments(rng, 3, steps + 1, dim, h);
      LambdaSchedule lam{trial % 3 == 0 ? LambdaSchedule::Kind::linear_in_normalized_time
                                        : LambdaSchedule::Kind::constant,
                         rng.uniform(0.1, 5.0)};
      const TimeRange range{0.0, 3.0 + static_cast<double>(steps + 1) * h};
      Tape tape;
      const BoundModel bm = bind_model(m, tape, false);
      const LossTerms lt = combined_loss(bm.field, tape, make_segment_batch(segs), op, lam,
                                         {method, h}, range);
      const double ref =
          combined_loss(model_fn(m), segs, signs, a, h, method, lam, range.t_min, range.t_max);
      rep.combined = std::max(rep.combined, rel_dev(lt.total.value().item(), ref));
    }

    // Metrics on random trajectories.
    {
      std::vector<Trajectory> pred, truth;
      for (int k = 0; k < 3; ++k) {
        pred.push_back(random_segments(rng, 1, 6, dim, h).front());
        truth.push_back(pred.back());
        for (State& s : truth.back().states) {
          for (double& v : s.values) v += 0.3 * rng.normal();
        }
      }
      rep.trajectory_mse = std::max(
          rep.trajectory_mse,
          rel_dev(trs::trajectory_mse(pred, truth).mean, oracle::trajectory_mse(pred, truth)));
      const double al = rng.uniform(-1.0, 1.0), be = rng.uniform(0.0, 1.0);
      auto duff = [&](const Vec& x) {
        double e = 0.0;
        const std::size_t d = x.size() / 2;
        for (std::size_t i = 0; i < d; ++i) {
          e += x[d + i] * x[d + i] / 2 + al * x[i] * x[i] / 2 + be * std::pow(x[i], 4) / 4;
        }
        return e;
      };
      if (dim == 2) {
        rep.energy_mse = std::max(
            rep.energy_mse,
            rel_dev(trs::energy_mse(pred, truth, EnergyFunction::duffing(al, be)).mean,
                    oracle::energy_mse(pred, truth, duff)));
      }
      auto quad = [](const Vec& x) {
        double e = 0.0;
        for (double v : x) e += v * v;
        return e;
      };
      rep.energy_mse =
          std::max(rep.energy_mse, rel_dev(trs::energy_mse(pred, truth, EnergyFunction::quadratic()).mean,
                                           oracle::energy_mse(pred, truth, quad)));
    }

    // Forward/backward relative error.
    {
      const auto init = random_states(rng, 5, dim, 2.0);
      const RelativeError e =
          forward_backward_relative_error(model_field(m), init, steps, op, {method, h});
      const double ref = forward_backward(model_fn(m), init, steps, signs, a, h, method);
      rep.forward_backward = std::max(rep.forward_backward, rel_dev(e.value, ref));
    }
  }
  return rep;
}

}  // namespace oracle
