#pragma once

// Fixed-step solvers. Backward evolution is the same stepper called with a
// negative step. Two flavours share the update formulas:
//   * numeric steppers over batched Tensors (ground truth, evaluation);
//   * tape steppers over Vars, so losses over a rollout differentiate
//     through every stage (discretize-then-optimize).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trs/autodiff.hpp"
#include "trs/tensor.hpp"

namespace trs {

struct State {
  std::vector<double> values;
  double time = 0.0;

  std::size_t dim() const { return values.size(); }
  bool all_finite() const;
  bool operator==(const State&) const = default;
};

struct Trajectory {
  std::vector<State> states;

  std::size_t size() const { return states.size(); }
  std::size_t transitions() const { return states.empty() ? 0 : states.size() - 1; }
  std::size_t dim() const { return states.empty() ? 0 : states.front().dim(); }
  // Throws std::invalid_argument unless timestamps strictly increase and all
  // states share a dimension.
  void validate() const;
  bool operator==(const Trajectory&) const = default;
};

// Batched right-hand side: rows of x are samples, t is [n x 1].
struct VectorField {
  using BatchFn = std::function<Tensor(const Tensor& x, const Tensor& t)>;

  std::size_t dim = 0;
  bool autonomous = true;
  BatchFn rhs;
  // Separable Hamiltonian parts on half-states: dK/dp(p, t) and dV/dq(q, t).
  // Both set or both empty.
  BatchFn kinetic_grad;
  BatchFn potential_grad;

  bool separable() const { return kinetic_grad && potential_grad; }
};

// Differentiable counterpart of VectorField.
struct TapeField {
  using Fn = std::function<Var(Var x, const Tensor& t)>;

  std::size_t dim = 0;
  bool autonomous = true;
  Fn rhs;
  Fn kinetic_grad;
  Fn potential_grad;

  bool separable() const { return kinetic_grad && potential_grad; }
};

enum class SolverMethod { rk4, leapfrog };

struct SolverConfig {
  SolverMethod method = SolverMethod::rk4;
  double step = 0.1;
};

std::string to_string(SolverMethod m);
SolverMethod solver_method_from_string(const std::string& s);

// Rows of `t` shifted by c.
Tensor shifted_time(const Tensor& t, double c);
Tensor time_column(std::size_t rows, double value);

// Numeric steppers ---------------------------------------------------------

// Classical four-stage Runge-Kutta. Throws NumericError on a non-finite stage.
Tensor rk4_step(const VectorField& f, const Tensor& x, const Tensor& t, double dt);
State rk4_step(const VectorField& f, const State& s, double dt);

// Kick-drift-kick on a state laid out as (q, p) halves:
//   p_half = p - dt/2 dV/dq(q); q' = q + dt dK/dp(p_half); p' = p_half - dt/2 dV/dq(q').
Tensor leapfrog_step(const VectorField& f, const Tensor& x, const Tensor& t, double dt);
State leapfrog_step(const VectorField& f, const State& s, double dt);

Tensor solve_step(const VectorField& f, const Tensor& x, const Tensor& t,
                  const SolverConfig& config);

// Components beyond this magnitude (or non-finite) count as a blow-up.
inline constexpr double kDivergenceClamp = 1e6;

struct RolloutResult {
  Trajectory trajectory;
  // First state index that blew up. States from there on hold the last
  // finite state clamped to +-kDivergenceClamp.
  std::optional<std::size_t> diverged_at;
};

RolloutResult rollout(const VectorField& f, const State& initial, std::size_t steps,
                      const SolverConfig& config);

// One rollout per row of `initial`, each starting at its own time; samples
// that blow up are frozen individually.
std::vector<RolloutResult> rollout_batch(const VectorField& f,
                                         std::span<const State> initial,
                                         std::size_t steps, const SolverConfig& config);

// Tape steppers -------------------------------------------------------------

Var rk4_step(const TapeField& f, Var x, const Tensor& t, double dt);
Var leapfrog_step(const TapeField& f, Var x, const Tensor& t, double dt);
Var solve_step(const TapeField& f, Var x, const Tensor& t, const SolverConfig& config);

// steps+1 nodes starting at x0 (which is returned as element 0). The batch
// clock advances by config.step per step from t0.
std::vector<Var> rollout(const TapeField& f, Var x0, const Tensor& t0,
                         std::size_t steps, const SolverConfig& config);

// Throws std::invalid_argument if the method cannot drive this field
// (leapfrog needs a separable, autonomous field with even dimension).
void check_solver_compatible(SolverMethod method, bool separable, bool autonomous,
                             std::size_t dim);

}  // namespace trs
