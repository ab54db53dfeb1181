#pragma once

// Experiment configuration (JSON, schema_version 1). One config describes a
// system, how its data is produced, and a list of model variants trained on
// the same data.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trs/dynamics.hpp"
#include "trs/losses.hpp"
#include "trs/metrics.hpp"
#include "trs/models.hpp"

namespace trs {

inline constexpr int kConfigSchemaVersion = 1;

// Synthetic replacement for a measured coupled-oscillator recording,
// simulated from the config's coupled_oscillators system.
struct StandInConfig {
  std::size_t rows = 500;
  double noise_sigma = 0.01;
  std::vector<double> initial = {1.0, 0.0, 0.0, 0.0};  // (q1, q2, p1, p2)
};

struct DataConfig {
  enum class Source { synthetic, measured };

  Source source = Source::synthetic;
  double dt = 0.1;
  std::size_t train_count = 50;
  std::size_t train_length = 30;
  std::size_t test_count = 50;
  std::size_t test_length = 200;
  double noise_sigma = 0.0;
  InitialSampler sampler;
  std::uint64_t seed = 0;
  std::size_t max_segment_length = 10;
  // Measured source only.
  double train_fraction = 0.6;
  StandInConfig stand_in;
};

struct TrainingConfig {
  std::size_t epochs = 5000;
  double learning_rate = 2e-4;
  std::optional<std::size_t> minibatch;  // empty = full batch
  std::uint64_t seed = 0;
};

struct VariantConfig {
  std::string name;
  ModelKind model = ModelKind::oden;
  std::vector<std::size_t> hidden = {1000};
  SolverMethod solver = SolverMethod::rk4;
  LambdaSchedule lambda;
};

enum class EnergyKind { none, quadratic, duffing };

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string experiment;
  SystemSpec system;
  DataConfig data;
  ReversingOperator reversing;
  TrainingConfig training;
  EnergyKind energy = EnergyKind::none;
  bool time_augmented = false;
  std::vector<VariantConfig> variants;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  const VariantConfig& variant(const std::string& name) const;
  ModelSpec model_spec(const VariantConfig& v) const;
  SolverConfig solver(const VariantConfig& v) const;
  DatasetSpec train_spec() const;
  DatasetSpec test_spec() const;
  std::optional<EnergyFunction> energy_function() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

}  // namespace trs
