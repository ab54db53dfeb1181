#pragma once

// Files: trajectory CSVs, measured coupled-oscillator recordings, model
// checkpoints, loss histories.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trs/integrators.hpp"
#include "trs/models.hpp"

namespace trs {

// Header `traj_id,step,t,c0,c1,...`, one row per state, %.17g numbers.
void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs);
void write_trajectories(const std::string& path, std::span<const Trajectory> trajs);
// Throws std::invalid_argument (with the line number) on malformed input,
// non-contiguous steps or non-increasing time.
std::vector<Trajectory> read_trajectories(std::istream& in);
std::vector<Trajectory> read_trajectories(const std::string& path);

// Measured recordings: columns `t,q1,p1,q2,p2`. In memory the state is
// reordered to (q1, q2, p1, p2) so that positions and momenta form halves.
Trajectory read_measured(std::istream& in);
Trajectory read_measured(const std::string& path);
void write_measured(std::ostream& out, const Trajectory& traj);
void write_measured(const std::string& path, const Trajectory& traj);

// Per-component division by the largest magnitude on the training portion.
struct Normalization {
  std::vector<double> scale;

  State apply(const State& s) const;
  State invert(const State& s) const;
  Trajectory apply(const Trajectory& t) const;
  Trajectory invert(const Trajectory& t) const;
};

struct MeasuredSplit {
  Trajectory train;  // normalized, on a uniform grid
  Trajectory test;
  Normalization normalization;
  double dt = 0.0;
  // Largest |t_k - (t_0 + k dt)| in the raw timestamps.
  double max_time_deviation = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;

  std::string metadata_json() const;
};

// Chronological split: the first floor(fraction * rows) rows train, the rest
// test. Timestamps are replaced by t_0 + k dt with dt the mean spacing.
MeasuredSplit ingest_measured(const Trajectory& raw, double train_fraction);

struct Checkpoint {
  Model model;
  std::string experiment;
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
};

// "TRSCKPT1", uint64 LE header length, JSON header, then every parameter as
// a little-endian float64 in flat_params order.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

struct EpochRecord {
  std::size_t epoch = 0;
  double l_ode = 0.0;
  std::optional<double> l_trs;
  double total = 0.0;
};

void write_loss_history(const std::string& path, std::span<const EpochRecord> history);

// 17 significant digits (%.17g), enough to round-trip any float64.
std::string format_double(double v);

}  // namespace trs
