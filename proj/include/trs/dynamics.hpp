#pragma once

// Ground-truth systems and synthetic datasets.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trs/integrators.hpp"
#include "trs/random.hpp"

namespace trs {

// dq/dt = p, dp/dt = -alpha q - beta q^3 - gamma p + delta cos(t)
struct DuffingParams {
  double alpha = 1.0;  // linear stiffness
  double beta = 0.0;   // cubic stiffness
  double gamma = 0.0;  // damping
  double delta = 0.0;  // drive amplitude

  bool conservative() const { return gamma == 0.0 && delta == 0.0; }
  bool operator==(const DuffingParams&) const = default;
};

std::pair<double, double> duffing_rhs(double q, double p, double t,
                                      const DuffingParams& params);

// dx/dt = 1 + yz, dy/dt = -xz, dz/dt = y^2 + 2yz
std::array<double, 3> attractor_rhs(double x, double y, double z);

// Two unit masses on springs k1, k2, joined by a coupling spring, each with
// linear damping. State order is (q1, q2, p1, p2). Used as an offline stand-in
// for measured coupled-oscillator data.
struct CoupledOscillatorParams {
  double k1 = 1.0;
  double k2 = 1.5;
  double coupling = 0.5;
  double damping = 0.02;
  bool operator==(const CoupledOscillatorParams&) const = default;
};

std::array<double, 4> coupled_oscillator_rhs(const std::array<double, 4>& x,
                                             const CoupledOscillatorParams& params);

enum class SystemKind { duffing, attractor, coupled_oscillators };

struct SystemSpec {
  SystemKind kind = SystemKind::duffing;
  DuffingParams duffing;
  CoupledOscillatorParams coupled;

  std::size_t dim() const;
  bool autonomous() const { return kind != SystemKind::duffing || duffing.delta == 0.0; }
  bool operator==(const SystemSpec&) const = default;
};

std::string to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);

// Numeric field. Conservative Duffing fields also expose their separable
// Hamiltonian gradients so leapfrog can drive them.
VectorField system_field(const SystemSpec& system);
// Same right-hand side expressed as tape ops.
TapeField system_tape_field(const SystemSpec& system, Tape& tape);

// Area-uniform draw from the annulus r_min <= |(q, p)| <= r_max.
std::pair<double, double> sample_annulus(double r_min, double r_max, Rng& rng);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const NoiseSpec&) const = default;
};

struct InitialSampler {
  enum class Kind { annulus, fixed_xy_uniform_z, fixed };
  Kind kind = Kind::annulus;
  double r_min = 0.2;
  double r_max = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z_min = 1.0;
  double z_max = 3.0;
  std::vector<double> fixed;  // for Kind::fixed

  std::vector<double> draw(Rng& rng, std::size_t dim) const;
  bool operator==(const InitialSampler&) const = default;
};

struct DatasetSpec {
  SystemSpec system;
  std::size_t count = 50;
  std::size_t length = 30;  // transitions; each trajectory has length + 1 states
  double dt = 0.1;
  InitialSampler sampler;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  // Independent sub-stream (train and test draw from different streams).
  std::uint64_t stream = 0;

  void validate() const;
};

struct GeneratedDataset {
  std::vector<Trajectory> clean;
  std::vector<Trajectory> noisy;
};

// RK4 at the dataset step from sampled initial states; the noisy copy adds
// sigma * N(0, 1) to every component of every state. Per-trajectory RNG
// streams make the result independent of batching. Throws NumericError if the
// ground truth blows up.
GeneratedDataset generate_dataset(const DatasetSpec& spec);

// Splits every trajectory into consecutive segments of at most max_len
// transitions; consecutive segments share their junction state.
std::vector<Trajectory> split_trajectories(const std::vector<Trajectory>& trajs,
                                           std::size_t max_len);

}  // namespace trs
