#pragma once

// Adam on the combined objective, evaluation by recursive rollout, and the
// glue that turns an ExperimentConfig into datasets and options.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trs/config.hpp"
#include "trs/dataio.hpp"
#include "trs/losses.hpp"
#include "trs/metrics.hpp"
#include "trs/models.hpp"

namespace trs {

struct TrainOptions {
  std::size_t epochs = 0;
  double learning_rate = 2e-4;
  std::optional<std::size_t> minibatch;  // empty = full batch
  std::uint64_t seed = 0;                // minibatch shuffling
  SolverConfig solver;
  ReversingOperator reversing;
  LambdaSchedule lambda;
  // Normalization range of time-dependent lambda; defaults to the span of
  // the training segments.
  std::optional<TimeRange> time_range;
  // Batches are evaluated in row chunks of at most this size (one tape each)
  // and the gradients summed, which bounds tape memory.
  std::size_t max_rows_per_tape = 512;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;  // loss before each epoch's update(s)
};

// Throws NumericError naming the epoch if the loss or a gradient becomes
// non-finite.
TrainResult train(Model model, std::span<const Trajectory> segments, const TrainOptions& options);

TimeRange time_range(std::span<const Trajectory> segments);

struct EvalOptions {
  SolverConfig solver;
  std::optional<EnergyFunction> energy;
  std::string experiment;
  std::string variant;
  std::uint64_t seed = 0;
};

// Rolls the field out from every test initial state over the test horizon.
MetricReport evaluate(const VectorField& field, const std::string& model_name,
                      std::span<const Trajectory> test, const EvalOptions& options,
                      std::vector<Trajectory>* predictions = nullptr);
MetricReport evaluate(const Model& model, std::span<const Trajectory> test,
                      const EvalOptions& options, std::vector<Trajectory>* predictions = nullptr);

struct ExperimentData {
  std::vector<Trajectory> train;        // noisy, unsplit
  std::vector<Trajectory> train_clean;
  std::vector<Trajectory> test;
  std::optional<MeasuredSplit> measured;
};

// Synthetic configs simulate train and test sets. Measured configs read
// `measured_path`, or simulate the configured stand-in recording when empty.
ExperimentData build_experiment_data(const ExperimentConfig& config,
                                     const std::optional<std::string>& measured_path = {});
Trajectory simulate_stand_in(const ExperimentConfig& config);

TrainOptions train_options(const ExperimentConfig& config, const VariantConfig& variant);
EvalOptions eval_options(const ExperimentConfig& config, const VariantConfig& variant);

// Full pipeline for one variant: init, split, train. Variants of the same
// model kind start from identical weights, so that e.g. ODEN and TRS-ODEN
// differ only in the objective.
TrainResult train_variant(const ExperimentConfig& config, const VariantConfig& variant,
                          const ExperimentData& data);
std::uint64_t model_seed(const ExperimentConfig& config, const VariantConfig& variant);

}  // namespace trs
