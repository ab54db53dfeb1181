#pragma once

// Evaluation quantities: trajectory and energy MSE, forward/backward
// symmetry error, finite-time Lyapunov exponents, Hamiltonian symmetry gap.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trs/integrators.hpp"
#include "trs/losses.hpp"
#include "trs/models.hpp"

namespace trs {

struct EnergyFunction {
  enum class Kind { quadratic, duffing, hoden };

  Kind kind = Kind::quadratic;
  double alpha = 1.0;
  double beta = 0.0;
  std::shared_ptr<const HodenModel> model;
  bool calibrate = false;

  // q^2 + p^2 summed over all components.
  static EnergyFunction quadratic();
  // p^2/2 + alpha q^2/2 + beta q^4/4 (no drive term).
  static EnergyFunction duffing(double alpha, double beta);
  static EnergyFunction hoden(HodenModel model, bool calibrate = false);

  double operator()(const State& s) const;
  std::string name() const;
};

// Population statistics of per-trajectory errors.
struct ErrorSummary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_trajectory;

  bool operator==(const ErrorSummary&) const = default;
};

ErrorSummary summarize(std::vector<double> per_trajectory);

// Per trajectory: mean over states (including the shared initial state) and
// components of the squared error.
ErrorSummary trajectory_mse(std::span<const Trajectory> predicted,
                            std::span<const Trajectory> truth);
// Per trajectory: mean over states of the squared energy error.
ErrorSummary energy_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                        const EnergyFunction& energy);

struct RelativeError {
  double value = 0.0;
  double numerator = 0.0;    // sqrt(sum |R(fwd_i) - bwd_i|^2)
  double denominator = 0.0;  // sqrt(sum |R(fwd_i)|^2)
  // Denominator vanished; value holds the absolute error instead.
  bool zero_denominator = false;
  std::size_t diverged = 0;
};

// Rolls every initial state forward, and R(initial) backward with the
// negated step, then compares step by step (i = 1..steps), pooling all steps
// and samples into one ratio of Euclidean norms.
RelativeError forward_backward_relative_error(const VectorField& f,
                                              std::span<const State> initial,
                                              std::size_t steps,
                                              const ReversingOperator& op,
                                              const SolverConfig& config);

struct LyapunovSeries {
  std::vector<double> times;  // t_1..t_n
  std::vector<double> sigma;  // log(|dx(t_i)| / |dx(t_0)|) / (t_i - t_0)
};

inline constexpr double kLyapunovPerturbation = 1e-6;

// Base and perturbed copies evolved with the same solver, no renormalization.
// `direction` is normalized internally. Throws NumericError on blow-up.
LyapunovSeries lyapunov_exponent(const VectorField& f, const State& initial, std::size_t steps,
                                 const SolverConfig& config, std::span<const double> direction,
                                 double perturbation = kLyapunovPerturbation);
// Random unit direction drawn from `seed`.
LyapunovSeries lyapunov_exponent(const VectorField& f, const State& initial, std::size_t steps,
                                 const SolverConfig& config, std::uint64_t seed,
                                 double perturbation = kLyapunovPerturbation);
// Mean sigma over an ensemble of initial states (member i uses direction
// stream i of `seed`).
LyapunovSeries lyapunov_ensemble(const VectorField& f, std::span<const State> initial,
                                 std::size_t steps, const SolverConfig& config,
                                 std::uint64_t seed,
                                 double perturbation = kLyapunovPerturbation);

struct SymmetryGap {
  std::vector<double> p;
  std::vector<double> gap;  // H(q, p) - H(q, -p)
  double max_abs = 0.0;
};

// One-dimensional halves: q fixed, p over a grid.
SymmetryGap hamiltonian_symmetry_gap(const HodenModel& model, double q,
                                     std::span<const double> p_grid);
std::vector<double> linspace(double lo, double hi, std::size_t count);

struct MetricReport {
  std::string experiment;
  std::string variant;
  std::string model;  // oden | hoden
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::size_t divergence_count = 0;
  ErrorSummary trajectory;
  std::optional<ErrorSummary> energy;
  std::string energy_name;

  bool operator==(const MetricReport&) const = default;
};

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

}  // namespace trs
