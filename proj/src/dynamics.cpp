#include "trs/dynamics.hpp"

#include <cmath>
#include <numbers>

namespace trs {

std::pair<double, double> duffing_rhs(double q, double p, double t,
                                      const DuffingParams& params) {
  const double dq = p;
  const double dp = -params.alpha * q - params.beta * q * q * q - params.gamma * p +
                    params.delta * std::cos(t);
  return {dq, dp};
}

std::array<double, 3> attractor_rhs(double x, double y, double z) {
  return {1.0 + y * z, -x * z, y * y + 2.0 * y * z};
}

std::array<double, 4> coupled_oscillator_rhs(const std::array<double, 4>& x,
                                             const CoupledOscillatorParams& c) {
  const double q1 = x[0], q2 = x[1], p1 = x[2], p2 = x[3];
  return {p1, p2, -c.k1 * q1 - c.coupling * (q1 - q2) - c.damping * p1,
          -c.k2 * q2 - c.coupling * (q2 - q1) - c.damping * p2};
}

std::size_t SystemSpec::dim() const {
  switch (kind) {
    case SystemKind::duffing: return 2;
    case SystemKind::attractor: return 3;
    case SystemKind::coupled_oscillators: return 4;
  }
  return 0;
}

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::duffing: return "duffing";
    case SystemKind::attractor: return "attractor";
    case SystemKind::coupled_oscillators: return "coupled_oscillators";
  }
  return "?";
}

SystemKind system_kind_from_string(const std::string& s) {
  if (s == "duffing") return SystemKind::duffing;
  if (s == "attractor") return SystemKind::attractor;
  if (s == "coupled_oscillators") return SystemKind::coupled_oscillators;
  throw std::invalid_argument("unknown system kind '" + s + "'");
}

VectorField system_field(const SystemSpec& system) {
  VectorField f;
  f.dim = system.dim();
  f.autonomous = system.autonomous();
  switch (system.kind) {
    case SystemKind::duffing: {
      const DuffingParams p = system.duffing;
      f.rhs = [p](const Tensor& x, const Tensor& t) {
        Tensor out(x.rows(), 2);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const auto [dq, dp] = duffing_rhs(x(r, 0), x(r, 1), t(r, 0), p);
          out(r, 0) = dq;
          out(r, 1) = dp;
        }
        return out;
      };
      if (p.conservative()) {
        f.kinetic_grad = [](const Tensor& pm, const Tensor&) { return pm; };
        f.potential_grad = [p](const Tensor& q, const Tensor&) {
          Tensor out(q.rows(), 1);
          for (std::size_t r = 0; r < q.rows(); ++r) {
            const double v = q(r, 0);
            out(r, 0) = p.alpha * v + p.beta * v * v * v;
          }
          return out;
        };
      }
      break;
    }
    case SystemKind::attractor:
      f.rhs = [](const Tensor& x, const Tensor&) {
        Tensor out(x.rows(), 3);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const auto d = attractor_rhs(x(r, 0), x(r, 1), x(r, 2));
          for (std::size_t c = 0; c < 3; ++c) out(r, c) = d[c];
        }
        return out;
      };
      break;
    case SystemKind::coupled_oscillators: {
      const CoupledOscillatorParams c = system.coupled;
      f.rhs = [c](const Tensor& x, const Tensor&) {
        Tensor out(x.rows(), 4);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const auto d = coupled_oscillator_rhs({x(r, 0), x(r, 1), x(r, 2), x(r, 3)}, c);
          for (std::size_t k = 0; k < 4; ++k) out(r, k) = d[k];
        }
        return out;
      };
      break;
    }
  }
  return f;
}

TapeField system_tape_field(const SystemSpec& system, Tape& tape) {
  TapeField f;
  f.dim = system.dim();
  f.autonomous = system.autonomous();
  switch (system.kind) {
    case SystemKind::duffing: {
      const DuffingParams p = system.duffing;
      f.rhs = [p, &tape](Var x, const Tensor& t) {
        const Var q = ad::slice_cols(x, 0, 1);
        const Var v = ad::slice_cols(x, 1, 1);
        Var dp = ad::scale(q, -p.alpha) - ad::scale(q * q * q, p.beta) -
                 ad::scale(v, p.gamma);
        if (p.delta != 0.0) {
          Tensor drive(t.rows(), 1);
          for (std::size_t r = 0; r < t.rows(); ++r) drive(r, 0) = p.delta * std::cos(t(r, 0));
          dp = dp + tape.constant(std::move(drive));
        }
        return ad::concat_cols(v, dp);
      };
      if (p.conservative()) {
        f.kinetic_grad = [](Var pm, const Tensor&) { return pm; };
        f.potential_grad = [p](Var q, const Tensor&) {
          return ad::scale(q, p.alpha) + ad::scale(q * q * q, p.beta);
        };
      }
      break;
    }
    case SystemKind::attractor:
      f.rhs = [&tape](Var s, const Tensor&) {
        const Var x = ad::slice_cols(s, 0, 1);
        const Var y = ad::slice_cols(s, 1, 1);
        const Var z = ad::slice_cols(s, 2, 1);
        const Var one = tape.constant(Tensor(s.rows(), 1, 1.0));
        const Var yz = y * z;
        return ad::concat_cols(ad::concat_cols(one + yz, -(x * z)),
                               y * y + ad::scale(yz, 2.0));
      };
      break;
    case SystemKind::coupled_oscillators: {
      const CoupledOscillatorParams c = system.coupled;
      f.rhs = [c](Var s, const Tensor&) {
        const Var q1 = ad::slice_cols(s, 0, 1);
        const Var q2 = ad::slice_cols(s, 1, 1);
        const Var p1 = ad::slice_cols(s, 2, 1);
        const Var p2 = ad::slice_cols(s, 3, 1);
        const Var diff = q1 - q2;
        const Var dp1 = ad::scale(q1, -c.k1) - ad::scale(diff, c.coupling) -
                        ad::scale(p1, c.damping);
        const Var dp2 = ad::scale(q2, -c.k2) + ad::scale(diff, c.coupling) -
                        ad::scale(p2, c.damping);
        return ad::concat_cols(ad::concat_cols(p1, p2), ad::concat_cols(dp1, dp2));
      };
      break;
    }
  }
  return f;
}

std::pair<double, double> sample_annulus(double r_min, double r_max, Rng& rng) {
  if (!(r_min >= 0.0) || !(r_max > r_min)) {
    throw std::invalid_argument("annulus needs 0 <= r_min < r_max, got [" +
                                std::to_string(r_min) + ", " + std::to_string(r_max) + "]");
  }
  const double angle = 2.0 * std::numbers::pi * rng.uniform();
  const double u = rng.uniform();
  const double r = std::sqrt(u * (r_max * r_max - r_min * r_min) + r_min * r_min);
  return {r * std::cos(angle), r * std::sin(angle)};
}

std::vector<double> InitialSampler::draw(Rng& rng, std::size_t dim) const {
  switch (kind) {
    case Kind::annulus: {
      if (dim != 2) throw std::invalid_argument("annulus sampler needs a 2D system");
      const auto [q, p] = sample_annulus(r_min, r_max, rng);
      return {q, p};
    }
    case Kind::fixed_xy_uniform_z:
      if (dim != 3) throw std::invalid_argument("fixed_xy_uniform_z sampler needs a 3D system");
      if (!(z_max > z_min)) throw std::invalid_argument("sampler needs z_min < z_max");
      return {x, y, rng.uniform(z_min, z_max)};
    case Kind::fixed:
      if (fixed.size() != dim) {
        throw std::invalid_argument("fixed initial state has dimension " +
                                    std::to_string(fixed.size()) + ", system has " +
                                    std::to_string(dim));
      }
      return fixed;
  }
  return {};
}

void DatasetSpec::validate() const {
  if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
  if (length < 2) throw std::invalid_argument("dataset length must be >= 2 transitions");
  if (!(dt > 0.0)) throw std::invalid_argument("dataset dt must be > 0");
  if (!(noise.sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
}

namespace {
constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;  // "nois"
}  // namespace

GeneratedDataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.system.dim();
  std::vector<State> initial;
  initial.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng(stream_seed(spec.seed, kInitStream + (spec.stream << 32), i));
    initial.push_back(State{spec.sampler.draw(rng, dim), 0.0});
  }

  const VectorField f = system_field(spec.system);
  auto results = rollout_batch(f, initial, spec.length, SolverConfig{SolverMethod::rk4, spec.dt});

  GeneratedDataset out;
  out.clean.reserve(spec.count);
  out.noisy.reserve(spec.count);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].diverged_at) {
      throw NumericError("ground truth trajectory " + std::to_string(i) +
                             " blew up at step " + std::to_string(*results[i].diverged_at),
                         i);
    }
    Trajectory noisy = results[i].trajectory;
    if (spec.noise.sigma > 0.0) {
      Rng rng(stream_seed(spec.seed ^ spec.noise.seed, kNoiseStream + (spec.stream << 32), i));
      for (State& s : noisy.states) {
        for (double& v : s.values) v += spec.noise.sigma * rng.normal();
      }
    }
    out.clean.push_back(std::move(results[i].trajectory));
    out.noisy.push_back(std::move(noisy));
  }
  return out;
}

std::vector<Trajectory> split_trajectories(const std::vector<Trajectory>& trajs,
                                           std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("max segment length must be >= 2");
  std::vector<Trajectory> out;
  for (const Trajectory& tr : trajs) {
    const std::size_t n = tr.transitions();
    if (n == 0) continue;
    for (std::size_t start = 0; start < n; start += max_len) {
      const std::size_t end = std::min(n, start + max_len);
      Trajectory seg;
      seg.states.assign(tr.states.begin() + static_cast<std::ptrdiff_t>(start),
                        tr.states.begin() + static_cast<std::ptrdiff_t>(end) + 1);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace trs
