#include "trs/losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace trs {

ReversingOperator ReversingOperator::momentum_flip(std::size_t dim, double time_offset) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("momentum_flip needs an even state dim, got " +
                                std::to_string(dim));
  }
  ReversingOperator op;
  op.kind = Kind::momentum_flip;
  op.signs.assign(dim, 1.0);
  for (std::size_t i = dim / 2; i < dim; ++i) op.signs[i] = -1.0;
  op.time_offset = time_offset;
  return op;
}

ReversingOperator ReversingOperator::full_negation(std::size_t dim, double time_offset) {
  if (dim == 0) throw std::invalid_argument("full_negation needs dim >= 1");
  ReversingOperator op;
  op.kind = Kind::full_negation;
  op.signs.assign(dim, -1.0);
  op.time_offset = time_offset;
  return op;
}

ReversingOperator ReversingOperator::custom(std::vector<double> signs, double time_offset) {
  ReversingOperator op;
  op.kind = Kind::custom;
  op.signs = std::move(signs);
  op.time_offset = time_offset;
  op.validate();
  return op;
}

void ReversingOperator::validate() const {
  if (signs.empty()) throw std::invalid_argument("reversing operator has no components");
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] != 1.0 && signs[i] != -1.0) {
      throw std::invalid_argument("reversing operator sign " + std::to_string(i) +
                                  " must be +1 or -1");
    }
  }
  if (!std::isfinite(time_offset)) {
    throw std::invalid_argument("reversing operator time offset must be finite");
  }
}

std::string to_string(ReversingOperator::Kind k) {
  switch (k) {
    case ReversingOperator::Kind::momentum_flip: return "momentum_flip";
    case ReversingOperator::Kind::full_negation: return "full_negation";
    case ReversingOperator::Kind::custom: return "custom";
  }
  return "?";
}

ReversingOperator::Kind reversing_kind_from_string(const std::string& s) {
  if (s == "momentum_flip") return ReversingOperator::Kind::momentum_flip;
  if (s == "full_negation") return ReversingOperator::Kind::full_negation;
  if (s == "custom") return ReversingOperator::Kind::custom;
  throw std::invalid_argument("unknown reversing operator '" + s + "'");
}

namespace {

void check_dim(const ReversingOperator& op, std::size_t dim) {
  if (op.dim() != dim) {
    throw std::invalid_argument("reversing operator has dim " + std::to_string(op.dim()) +
                                ", state has " + std::to_string(dim));
  }
}

}  // namespace

State apply_reversing(const ReversingOperator& op, const State& state) {
  check_dim(op, state.dim());
  State out;
  out.values.resize(state.dim());
  for (std::size_t i = 0; i < state.dim(); ++i) out.values[i] = op.signs[i] * state.values[i];
  out.time = -state.time + op.time_offset;
  return out;
}

Tensor apply_reversing(const ReversingOperator& op, const Tensor& x) {
  check_dim(op, x.cols());
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) *= op.signs[c];
  }
  return out;
}

Var apply_reversing(const ReversingOperator& op, Var x) {
  check_dim(op, x.cols());
  return ad::scale_cols(x, op.signs);
}

void SegmentBatch::validate() const {
  if (states.size() < 2) throw std::invalid_argument("segment batch needs >= 1 transition");
  if (t0.cols() != 1) throw std::invalid_argument("segment batch t0 must be [n x 1]");
  if (!(dt > 0.0)) throw std::invalid_argument("segment batch dt must be > 0");
  for (const Tensor& s : states) {
    if (s.rows() != t0.rows() || s.cols() != states.front().cols()) {
      throw std::invalid_argument("segment batch states disagree in shape");
    }
  }
}

SegmentBatch make_segment_batch(std::span<const Trajectory> segments) {
  if (segments.empty()) throw std::invalid_argument("no segments to batch");
  const std::size_t len = segments.front().size();
  const std::size_t dim = segments.front().dim();
  if (len < 2) throw std::invalid_argument("segments need >= 1 transition");
  const double dt = segments.front().states[1].time - segments.front().states[0].time;
  if (!(dt > 0.0)) throw std::invalid_argument("segment timestamps must increase");

  SegmentBatch batch;
  batch.dt = dt;
  batch.t0 = Tensor(segments.size(), 1);
  batch.states.assign(len, Tensor(segments.size(), dim));
  for (std::size_t r = 0; r < segments.size(); ++r) {
    const Trajectory& seg = segments[r];
    if (seg.size() != len || seg.dim() != dim) {
      throw std::invalid_argument("segment " + std::to_string(r) +
                                  " differs in length or dimension from segment 0");
    }
    batch.t0(r, 0) = seg.states[0].time;
    for (std::size_t i = 0; i < len; ++i) {
      const State& s = seg.states[i];
      if (s.dim() != dim) throw std::invalid_argument("segment state dimension mismatch");
      if (i > 0) {
        const double step = s.time - seg.states[i - 1].time;
        if (std::abs(step - dt) > 1e-9 * dt) {
          throw std::invalid_argument("segment " + std::to_string(r) + " step " +
                                      std::to_string(i) + " is off the uniform grid");
        }
      }
      for (std::size_t c = 0; c < dim; ++c) batch.states[i](r, c) = s.values[c];
    }
  }
  return batch;
}

std::vector<SegmentBatch> group_segments(std::span<const Trajectory> segments) {
  std::map<std::size_t, std::vector<Trajectory>> by_len;
  for (const Trajectory& s : segments) by_len[s.size()].push_back(s);
  std::vector<SegmentBatch> out;
  for (const auto& [len, segs] : by_len) out.push_back(make_segment_batch(segs));
  return out;
}

Var ode_loss(std::span<const Var> rollout, std::span<const Tensor> observed) {
  if (rollout.size() != observed.size() || rollout.size() < 2) {
    throw std::invalid_argument("ode_loss: rollout has " + std::to_string(rollout.size()) +
                                " states, observation has " + std::to_string(observed.size()));
  }
  Tape& tape = *rollout.front().tape;
  const std::size_t n = observed.front().rows();
  std::optional<Var> sum;
  for (std::size_t i = 1; i < rollout.size(); ++i) {
    if (!rollout[i].value().same_shape(observed[i])) {
      throw std::invalid_argument("ode_loss: shape mismatch at step " + std::to_string(i));
    }
    const Var term = ad::sum_squares(rollout[i] - tape.constant(observed[i]));
    sum = sum ? *sum + term : term;
  }
  return ad::scale(*sum, 1.0 / static_cast<double>(n));
}

double ode_loss(const Trajectory& predicted, const Trajectory& observed) {
  if (predicted.size() != observed.size() || predicted.size() < 2) {
    throw std::invalid_argument("ode_loss: trajectories have different lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 1; i < predicted.size(); ++i) {
    const State& a = predicted.states[i];
    const State& b = observed.states[i];
    if (a.dim() != b.dim()) throw std::invalid_argument("ode_loss: dimension mismatch");
    if (std::abs(a.time - b.time) > 1e-9 * std::max(1.0, std::abs(b.time))) {
      throw std::invalid_argument("ode_loss: time grids differ at step " + std::to_string(i));
    }
    for (std::size_t c = 0; c < a.dim(); ++c) {
      const double d = a.values[c] - b.values[c];
      sum += d * d;
    }
  }
  return sum;
}

namespace {

std::vector<Var> backward_chain(const TapeField& f, Var x0, const Tensor& t0,
                                std::size_t steps, const ReversingOperator& op,
                                const SolverConfig& config) {
  Tensor tau(t0.rows(), 1);
  for (std::size_t r = 0; r < t0.rows(); ++r) tau(r, 0) = -t0(r, 0) + op.time_offset;
  return rollout(f, apply_reversing(op, x0), tau, steps,
                 SolverConfig{config.method, -config.step});
}

}  // namespace

Var trs_loss_from_forward(const TapeField& f, std::span<const Var> forward, const Tensor& t0,
                          const ReversingOperator& op, const SolverConfig& config,
                          const std::vector<std::vector<double>>* step_weights) {
  if (forward.size() < 2) throw std::invalid_argument("trs_loss: need >= 1 step");
  const std::size_t steps = forward.size() - 1;
  if (step_weights && step_weights->size() != steps) {
    throw std::invalid_argument("trs_loss: expected one weight row per step");
  }
  const std::size_t n = forward.front().rows();
  const std::vector<Var> backward = backward_chain(f, forward.front(), t0, steps, op, config);

  std::optional<Var> sum;
  for (std::size_t i = 1; i <= steps; ++i) {
    const Var diff = apply_reversing(op, forward[i]) - backward[i];
    const Var term = step_weights ? ad::weighted_sum_squares(diff, (*step_weights)[i - 1])
                                  : ad::sum_squares(diff);
    sum = sum ? *sum + term : term;
  }
  return ad::scale(*sum, 1.0 / static_cast<double>(n));
}

Var trs_loss(const TapeField& f, Var x0, const Tensor& t0, std::size_t steps,
             const ReversingOperator& op, const SolverConfig& config) {
  if (!f.autonomous) {
    throw std::invalid_argument("trs_loss: field depends on time; use trs_loss_nonautonomous");
  }
  const std::vector<Var> forward = rollout(f, x0, t0, steps, config);
  return trs_loss_from_forward(f, forward, t0, op, config);
}

Var trs_loss_nonautonomous(const TapeField& f, Var x0, const Tensor& t0, std::size_t steps,
                           const ReversingOperator& op, const SolverConfig& config) {
  if (f.autonomous) {
    throw std::invalid_argument("trs_loss_nonautonomous: field is autonomous; use trs_loss");
  }
  const std::vector<Var> forward = rollout(f, x0, t0, steps, config);
  return trs_loss_from_forward(f, forward, t0, op, config);
}

void LambdaSchedule::validate() const {
  if (!std::isfinite(coefficient) || coefficient < 0.0) {
    throw std::invalid_argument("lambda coefficient must be finite and >= 0");
  }
}

std::string to_string(LambdaSchedule::Kind k) {
  return k == LambdaSchedule::Kind::constant ? "constant" : "linear_in_normalized_time";
}

LambdaSchedule::Kind lambda_kind_from_string(const std::string& s) {
  if (s == "constant") return LambdaSchedule::Kind::constant;
  if (s == "linear_in_normalized_time") return LambdaSchedule::Kind::linear_in_normalized_time;
  throw std::invalid_argument("unknown lambda schedule '" + s + "'");
}

double lambda_value(const LambdaSchedule& schedule, double t, double t_min, double t_max) {
  if (schedule.kind == LambdaSchedule::Kind::constant) return schedule.coefficient;
  if (!(t_max > t_min)) {
    throw std::invalid_argument("linear lambda schedule needs t_min < t_max");
  }
  return schedule.coefficient * (t - t_min) / (t_max - t_min);
}

LossTerms combined_loss(const TapeField& f, Tape& tape, const SegmentBatch& batch,
                        const ReversingOperator& op, const LambdaSchedule& schedule,
                        const SolverConfig& config, const TimeRange& range) {
  batch.validate();
  if (std::abs(config.step - batch.dt) > 1e-9 * batch.dt) {
    throw std::invalid_argument("combined_loss: solver step " + std::to_string(config.step) +
                                " differs from data step " + std::to_string(batch.dt));
  }
  const std::vector<Var> forward =
      rollout(f, tape.constant(batch.states.front()), batch.t0, batch.steps(), config);
  const Var l_ode = ode_loss(forward, batch.states);

  LossTerms out;
  out.ode = l_ode.value().item();
  if (schedule.is_zero()) {
    out.total = l_ode;
    return out;
  }

  const std::size_t n = batch.rows();
  std::vector<std::vector<double>> weights(batch.steps(), std::vector<double>(n));
  for (std::size_t i = 0; i < batch.steps(); ++i) {
    for (std::size_t r = 0; r < n; ++r) {
      const double t_i = batch.t0(r, 0) + static_cast<double>(i) * batch.dt;
      weights[i][r] = lambda_value(schedule, t_i, range.t_min, range.t_max);
    }
  }
  const std::vector<Var> backward =
      backward_chain(f, forward.front(), batch.t0, batch.steps(), op, config);
  std::optional<Var> weighted;
  double unweighted = 0.0;
  for (std::size_t i = 1; i <= batch.steps(); ++i) {
    const Var diff = apply_reversing(op, forward[i]) - backward[i];
    const Var term = ad::weighted_sum_squares(diff, weights[i - 1]);
    weighted = weighted ? *weighted + term : term;
    for (double v : diff.value().values()) unweighted += v * v;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.total = l_ode + ad::scale(*weighted, inv_n);
  out.trs = unweighted * inv_n;
  return out;
}

}  // namespace trs
