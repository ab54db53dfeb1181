#include "trs/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "trs/random.hpp"

namespace trs {

EnergyFunction EnergyFunction::quadratic() { return EnergyFunction{}; }

EnergyFunction EnergyFunction::duffing(double alpha, double beta) {
  EnergyFunction e;
  e.kind = Kind::duffing;
  e.alpha = alpha;
  e.beta = beta;
  return e;
}

EnergyFunction EnergyFunction::hoden(HodenModel model, bool calibrate) {
  model.validate();
  EnergyFunction e;
  e.kind = Kind::hoden;
  e.model = std::make_shared<const HodenModel>(std::move(model));
  e.calibrate = calibrate;
  return e;
}

double EnergyFunction::operator()(const State& s) const {
  if (kind == Kind::hoden) return hoden_energy(*model, s, calibrate);
  if (s.dim() % 2 != 0) {
    throw std::invalid_argument("closed-form energy needs (q, p) halves, got dim " +
                                std::to_string(s.dim()));
  }
  const std::size_t half = s.dim() / 2;
  double e = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    const double q = s.values[i];
    const double p = s.values[half + i];
    if (kind == Kind::quadratic) {
      e += q * q + p * p;
    } else {
      e += 0.5 * p * p + 0.5 * alpha * q * q + 0.25 * beta * q * q * q * q;
    }
  }
  return e;
}

std::string EnergyFunction::name() const {
  switch (kind) {
    case Kind::quadratic: return "quadratic";
    case Kind::duffing: return "duffing";
    case Kind::hoden: return "hoden";
  }
  return "?";
}

ErrorSummary summarize(std::vector<double> per_trajectory) {
  ErrorSummary s;
  if (!per_trajectory.empty()) {
    const double n = static_cast<double>(per_trajectory.size());
    double sum = 0.0;
    for (double v : per_trajectory) sum += v;
    s.mean = sum / n;
    double var = 0.0;
    for (double v : per_trajectory) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / n);
  }
  s.per_trajectory = std::move(per_trajectory);
  return s;
}

namespace {

void check_aligned(const Trajectory& a, const Trajectory& b, std::size_t index) {
  if (a.size() != b.size() || a.dim() != b.dim() || a.size() == 0) {
    throw std::invalid_argument("trajectory " + std::to_string(index) +
                                ": prediction and truth are not aligned");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ta = a.states[i].time;
    const double tb = b.states[i].time;
    if (std::abs(ta - tb) > 1e-9 * std::max(1.0, std::abs(tb))) {
      throw std::invalid_argument("trajectory " + std::to_string(index) +
                                  ": time grids differ at state " + std::to_string(i));
    }
  }
}

void check_sets(std::span<const Trajectory> predicted, std::span<const Trajectory> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("metric needs equally many (>= 1) predicted and true trajectories");
  }
  for (std::size_t k = 0; k < truth.size(); ++k) check_aligned(predicted[k], truth[k], k);
}

}  // namespace

ErrorSummary trajectory_mse(std::span<const Trajectory> predicted,
                            std::span<const Trajectory> truth) {
  check_sets(predicted, truth);
  std::vector<double> per;
  per.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < truth[k].size(); ++i) {
      const auto& a = predicted[k].states[i].values;
      const auto& b = truth[k].states[i].values;
      for (std::size_t c = 0; c < a.size(); ++c) sum += (a[c] - b[c]) * (a[c] - b[c]);
    }
    per.push_back(sum / static_cast<double>(truth[k].size() * truth[k].dim()));
  }
  return summarize(std::move(per));
}

ErrorSummary energy_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                        const EnergyFunction& energy) {
  check_sets(predicted, truth);
  std::vector<double> per;
  per.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < truth[k].size(); ++i) {
      const double d = energy(predicted[k].states[i]) - energy(truth[k].states[i]);
      sum += d * d;
    }
    per.push_back(sum / static_cast<double>(truth[k].size()));
  }
  return summarize(std::move(per));
}

RelativeError forward_backward_relative_error(const VectorField& f,
                                              std::span<const State> initial,
                                              std::size_t steps,
                                              const ReversingOperator& op,
                                              const SolverConfig& config) {
  if (initial.empty()) throw std::invalid_argument("no initial states");
  std::vector<State> reversed;
  reversed.reserve(initial.size());
  for (const State& s : initial) reversed.push_back(apply_reversing(op, s));

  const auto fwd = rollout_batch(f, initial, steps, config);
  const auto bwd =
      rollout_batch(f, reversed, steps, SolverConfig{config.method, -config.step});

  RelativeError out;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < initial.size(); ++k) {
    if (fwd[k].diverged_at || bwd[k].diverged_at) ++out.diverged;
    for (std::size_t i = 1; i <= steps; ++i) {
      const State rf = apply_reversing(op, fwd[k].trajectory.states[i]);
      const auto& b = bwd[k].trajectory.states[i].values;
      for (std::size_t c = 0; c < b.size(); ++c) {
        num += (rf.values[c] - b[c]) * (rf.values[c] - b[c]);
        den += rf.values[c] * rf.values[c];
      }
    }
  }
  out.numerator = std::sqrt(num);
  out.denominator = std::sqrt(den);
  if (out.denominator == 0.0) {
    out.zero_denominator = true;
    out.value = out.numerator;
  } else {
    out.value = out.numerator / out.denominator;
  }
  return out;
}

LyapunovSeries lyapunov_exponent(const VectorField& f, const State& initial, std::size_t steps,
                                 const SolverConfig& config, std::span<const double> direction,
                                 double perturbation) {
  if (!(perturbation > 0.0)) throw std::invalid_argument("perturbation must be > 0");
  if (direction.size() != initial.dim()) {
    throw std::invalid_argument("perturbation direction has wrong dimension");
  }
  double norm = 0.0;
  for (double d : direction) norm += d * d;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw std::invalid_argument("perturbation direction is zero");

  State perturbed = initial;
  for (std::size_t c = 0; c < initial.dim(); ++c) {
    perturbed.values[c] += perturbation * direction[c] / norm;
  }
  double d0 = 0.0;
  for (std::size_t c = 0; c < initial.dim(); ++c) {
    const double d = perturbed.values[c] - initial.values[c];
    d0 += d * d;
  }
  d0 = std::sqrt(d0);

  const std::vector<State> pair = {initial, perturbed};
  const auto runs = rollout_batch(f, pair, steps, config);
  for (const auto& r : runs) {
    if (r.diverged_at) {
      throw NumericError("lyapunov: trajectory blew up at step " +
                             std::to_string(*r.diverged_at),
                         *r.diverged_at);
    }
  }

  LyapunovSeries out;
  for (std::size_t i = 1; i <= steps; ++i) {
    const State& a = runs[0].trajectory.states[i];
    const State& b = runs[1].trajectory.states[i];
    double d = 0.0;
    for (std::size_t c = 0; c < a.dim(); ++c) d += (a.values[c] - b.values[c]) * (a.values[c] - b.values[c]);
    const double elapsed = a.time - initial.time;
    out.times.push_back(a.time);
    out.sigma.push_back(std::log(std::sqrt(d) / d0) / elapsed);
  }
  return out;
}

namespace {

std::vector<double> random_direction(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

LyapunovSeries lyapunov_exponent(const VectorField& f, const State& initial, std::size_t steps,
                                 const SolverConfig& config, std::uint64_t seed,
                                 double perturbation) {
  const auto dir = random_direction(initial.dim(), seed);
  return lyapunov_exponent(f, initial, steps, config, dir, perturbation);
}

LyapunovSeries lyapunov_ensemble(const VectorField& f, std::span<const State> initial,
                                 std::size_t steps, const SolverConfig& config,
                                 std::uint64_t seed, double perturbation) {
  if (initial.empty()) throw std::invalid_argument("empty Lyapunov ensemble");
  LyapunovSeries mean;
  for (std::size_t k = 0; k < initial.size(); ++k) {
    const auto s = lyapunov_exponent(f, initial[k], steps, config,
                                     stream_seed(seed, 0x6c79, k), perturbation);
    if (k == 0) {
      mean = s;
    } else {
      for (std::size_t i = 0; i < steps; ++i) mean.sigma[i] += s.sigma[i];
    }
  }
  for (double& v : mean.sigma) v /= static_cast<double>(initial.size());
  return mean;
}

SymmetryGap hamiltonian_symmetry_gap(const HodenModel& model, double q,
                                     std::span<const double> p_grid) {
  if (model.half_dim() != 1) {
    throw std::invalid_argument("symmetry gap is defined for one-dimensional (q, p)");
  }
  SymmetryGap out;
  for (double p : p_grid) {
    const double g = hoden_energy(model, State{{q, p}, 0.0}) -
                     hoden_energy(model, State{{q, -p}, 0.0});
    out.p.push_back(p);
    out.gap.push_back(g);
    out.max_abs = std::max(out.max_abs, std::abs(g));
  }
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

namespace {

nlohmann::json summary_json(const ErrorSummary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"per_trajectory", s.per_trajectory}};
}

ErrorSummary summary_from(const nlohmann::json& j) {
  ErrorSummary s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.per_trajectory = j.at("per_trajectory").get<std::vector<double>>();
  return s;
}

}  // namespace

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["variant"] = r.variant;
  j["model"] = r.model;
  j["seed"] = r.seed;
  j["horizon"] = r.horizon;
  j["divergence_count"] = r.divergence_count;
  j["trajectory_mse"] = summary_json(r.trajectory);
  if (r.energy) {
    j["energy_mse"] = summary_json(*r.energy);
    j["energy"] = r.energy_name;
  } else {
    j["energy_mse"] = nullptr;
  }
  // max_digits10 output keeps every double exact.
  return j.dump(2);
}

MetricReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.horizon = j.at("horizon").get<std::size_t>();
  r.divergence_count = j.at("divergence_count").get<std::size_t>();
  r.trajectory = summary_from(j.at("trajectory_mse"));
  if (!j.at("energy_mse").is_null()) {
    r.energy = summary_from(j.at("energy_mse"));
    r.energy_name = j.at("energy").get<std::string>();
  }
  return r;
}

}  // namespace trs
