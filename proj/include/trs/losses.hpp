#pragma once

// Reversing operators, the trajectory-fit loss, the time-reversal-symmetry
// loss and the combined objective.
//
// For a field f and reversing operator R, time-reversal symmetry means
// f(R x, -t + a) = -R f(x, t). The symmetry loss rolls the model forward from
// x0 and backward (negative step) from R x0, and penalises the mismatch
// between R applied to the forward chain and the backward chain.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trs/integrators.hpp"

namespace trs {

struct ReversingOperator {
  enum class Kind { momentum_flip, full_negation, custom };

  Kind kind = Kind::momentum_flip;
  std::vector<double> signs;  // diagonal of R, entries +-1
  double time_offset = 0.0;   // a in t -> -t + a

  static ReversingOperator momentum_flip(std::size_t dim, double time_offset = 0.0);
  static ReversingOperator full_negation(std::size_t dim, double time_offset = 0.0);
  static ReversingOperator custom(std::vector<double> signs, double time_offset = 0.0);

  std::size_t dim() const { return signs.size(); }
  void validate() const;
  bool operator==(const ReversingOperator&) const = default;
};

std::string to_string(ReversingOperator::Kind k);
ReversingOperator::Kind reversing_kind_from_string(const std::string& s);

// Sign mask on the values; time maps to -t + a.
State apply_reversing(const ReversingOperator& op, const State& state);
Tensor apply_reversing(const ReversingOperator& op, const Tensor& x);
Var apply_reversing(const ReversingOperator& op, Var x);

// Segments of equal length stacked row-wise: states[i] holds every
// segment's i-th state.
struct SegmentBatch {
  std::vector<Tensor> states;
  Tensor t0;  // [n x 1]
  double dt = 0.0;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
  std::size_t rows() const { return t0.rows(); }
  std::size_t dim() const { return states.empty() ? 0 : states.front().cols(); }
  void validate() const;
};

// Throws unless all segments share length, dimension and (to 1e-9 relative)
// a uniform time step.
SegmentBatch make_segment_batch(std::span<const Trajectory> segments);
// One batch per distinct segment length, in increasing length order.
std::vector<SegmentBatch> group_segments(std::span<const Trajectory> segments);

// Mean over rows of sum_i |rollout[i] - observed[i]|^2 for i >= 1.
Var ode_loss(std::span<const Var> rollout, std::span<const Tensor> observed);
// Same quantity for one predicted/observed pair on a shared grid.
double ode_loss(const Trajectory& predicted, const Trajectory& observed);

// Mean over rows of sum_i w_i |R(forward[i]) - backward[i]|^2, i >= 1, where
// the backward chain starts from R(forward[0]) at time -t0 + a with step
// -config.step. `step_weights[i-1]` (one per row) defaults to 1.
Var trs_loss_from_forward(const TapeField& f, std::span<const Var> forward, const Tensor& t0,
                          const ReversingOperator& op, const SolverConfig& config,
                          const std::vector<std::vector<double>>* step_weights = nullptr);

// Autonomous fields only.
Var trs_loss(const TapeField& f, Var x0, const Tensor& t0, std::size_t steps,
             const ReversingOperator& op, const SolverConfig& config);
// Fields that read t; the backward chain runs at reflected times -t_i + a.
Var trs_loss_nonautonomous(const TapeField& f, Var x0, const Tensor& t0, std::size_t steps,
                           const ReversingOperator& op, const SolverConfig& config);

struct LambdaSchedule {
  enum class Kind { constant, linear_in_normalized_time };

  Kind kind = Kind::constant;
  double coefficient = 0.0;

  void validate() const;
  bool is_zero() const { return coefficient == 0.0; }
  bool operator==(const LambdaSchedule&) const = default;
};

std::string to_string(LambdaSchedule::Kind k);
LambdaSchedule::Kind lambda_kind_from_string(const std::string& s);

struct TimeRange {
  double t_min = 0.0;
  double t_max = 1.0;
};

double lambda_value(const LambdaSchedule& schedule, double t, double t_min, double t_max);

struct LossTerms {
  Var total;
  double ode = 0.0;
  // Unweighted symmetry loss; empty when the schedule is identically zero and
  // the backward chain was skipped.
  std::optional<double> trs;
};

// L_ODE + sum_i lambda(t_i) * (i-th L_TRS summand), both averaged over rows.
// The step that starts at t_i gets weight lambda(t_i).
LossTerms combined_loss(const TapeField& f, Tape& tape, const SegmentBatch& batch,
                        const ReversingOperator& op, const LambdaSchedule& schedule,
                        const SolverConfig& config, const TimeRange& range);

}  // namespace trs
