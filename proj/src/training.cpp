#include "trs/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "trs/adam.hpp"
#include "trs/random.hpp"

namespace trs {

TimeRange time_range(std::span<const Trajectory> segments) {
  TimeRange r{0.0, 0.0};
  bool first = true;
  for (const Trajectory& s : segments) {
    for (const State& st : s.states) {
      if (first) {
        r.t_min = r.t_max = st.time;
        first = false;
      }
      r.t_min = std::min(r.t_min, st.time);
      r.t_max = std::max(r.t_max, st.time);
    }
  }
  return r;
}

namespace {

struct StepLoss {
  double ode = 0.0;
  std::optional<double> trs;
  double total = 0.0;
};

// Row chunks of equal-length segments, ready for combined_loss.
std::vector<SegmentBatch> make_chunks(std::span<const Trajectory> segments,
                                      std::span<const std::size_t> indices,
                                      std::size_t max_rows) {
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return segments[a].size() < segments[b].size();
  });
  std::vector<SegmentBatch> chunks;
  std::vector<Trajectory> pending;
  auto flush = [&] {
    if (!pending.empty()) chunks.push_back(make_segment_batch(pending));
    pending.clear();
  };
  for (std::size_t idx : order) {
    if (!pending.empty() &&
        (pending.front().size() != segments[idx].size() || pending.size() >= max_rows)) {
      flush();
    }
    pending.push_back(segments[idx]);
  }
  flush();
  return chunks;
}

StepLoss accumulate_gradients(const Model& model, std::span<const SegmentBatch> chunks,
                              const TrainOptions& opt, const TimeRange& range,
                              const ModelParams& like, std::vector<Tensor>& grads) {
  std::size_t total_rows = 0;
  for (const SegmentBatch& c : chunks) total_rows += c.rows();
  grads.clear();
  for (const Tensor& t : like.tensors) grads.emplace_back(t.rows(), t.cols());

  StepLoss loss;
  for (const SegmentBatch& chunk : chunks) {
    const double w = static_cast<double>(chunk.rows()) / static_cast<double>(total_rows);
    Tape tape;
    const BoundModel bound = bind_model(model, tape, true);
    const LossTerms terms =
        combined_loss(bound.field, tape, chunk, opt.reversing, opt.lambda, opt.solver, range);
    const Var scaled = ad::scale(terms.total, w);
    tape.backward(scaled);
    const auto g = collect_grads(tape, bound.params, like);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      double* dst = grads[i].data();
      const double* src = g[i].data();
      for (std::size_t j = 0; j < grads[i].size(); ++j) dst[j] += src[j];
    }
    loss.ode += w * terms.ode;
    if (terms.trs) loss.trs = loss.trs.value_or(0.0) + w * *terms.trs;
    loss.total += scaled.value().item();
  }
  return loss;
}

}  // namespace

TrainResult train(Model model, std::span<const Trajectory> segments, const TrainOptions& opt) {
  validate_model(model);
  opt.lambda.validate();
  opt.reversing.validate();
  if (opt.reversing.dim() != state_dim(model)) {
    throw std::invalid_argument("reversing operator dimension does not match the model");
  }
  check_solver_compatible(opt.solver.method, kind_of(model) == ModelKind::hoden,
                          !time_augmented(model), state_dim(model));
  if (opt.minibatch && *opt.minibatch == 0) throw std::invalid_argument("minibatch size must be >= 1");
  if (opt.max_rows_per_tape == 0) throw std::invalid_argument("max_rows_per_tape must be >= 1");

  TrainResult result;
  result.model = std::move(model);
  if (opt.epochs == 0) return result;
  if (segments.empty()) throw std::invalid_argument("no training segments");

  const TimeRange range = opt.time_range.value_or(time_range(segments));
  ModelParams params = flat_params(result.model);
  AdamState adam = AdamState::for_params(params, opt.learning_rate);
  std::vector<Tensor> grads;

  std::vector<std::size_t> all(segments.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<SegmentBatch> full_chunks;
  if (!opt.minibatch) full_chunks = make_chunks(segments, all, opt.max_rows_per_tape);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      if (!opt.minibatch) {
        const StepLoss l = accumulate_gradients(result.model, full_chunks, opt, range, params, grads);
        adam_step(params, grads, adam);
        set_flat_params(result.model, params);
        rec.l_ode = l.ode;
        rec.l_trs = l.trs;
        rec.total = l.total;
      } else {
        std::vector<std::size_t> order = all;
        Rng rng(stream_seed(opt.seed, 0x73687566, epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
          const auto j = static_cast<std::size_t>(rng.next() % i);
          std::swap(order[i - 1], order[j]);
        }
        const std::size_t bs = *opt.minibatch;
        for (std::size_t start = 0; start < order.size(); start += bs) {
          const std::size_t end = std::min(order.size(), start + bs);
          const std::span<const std::size_t> idx(order.data() + start, end - start);
          const auto chunks = make_chunks(segments, idx, opt.max_rows_per_tape);
          const StepLoss l = accumulate_gradients(result.model, chunks, opt, range, params, grads);
          adam_step(params, grads, adam);
          set_flat_params(result.model, params);
          const double w = static_cast<double>(end - start) / static_cast<double>(order.size());
          rec.l_ode += w * l.ode;
          if (l.trs) rec.l_trs = rec.l_trs.value_or(0.0) + w * *l.trs;
          rec.total += w * l.total;
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                         epoch);
    }
    if (!std::isfinite(rec.total)) {
      throw NumericError("training loss is not finite at epoch " + std::to_string(epoch), epoch);
    }
    result.history.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(rec);
  }
  return result;
}

MetricReport evaluate(const VectorField& field, const std::string& model_name,
                      std::span<const Trajectory> test, const EvalOptions& opt,
                      std::vector<Trajectory>* predictions) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  std::vector<Trajectory> pred;
  pred.reserve(test.size());
  std::size_t diverged = 0;

  // Batch test trajectories of equal length together.
  std::size_t i = 0;
  while (i < test.size()) {
    std::size_t j = i;
    while (j < test.size() && test[j].size() == test[i].size()) ++j;
    std::vector<State> init;
    for (std::size_t k = i; k < j; ++k) init.push_back(test[k].states.front());
    auto runs = rollout_batch(field, init, test[i].transitions(), opt.solver);
    for (auto& r : runs) {
      if (r.diverged_at) ++diverged;
      pred.push_back(std::move(r.trajectory));
    }
    i = j;
  }

  MetricReport report;
  report.experiment = opt.experiment;
  report.variant = opt.variant;
  report.model = model_name;
  report.seed = opt.seed;
  report.horizon = test.front().transitions();
  report.divergence_count = diverged;
  report.trajectory = trajectory_mse(pred, test);
  if (opt.energy) {
    report.energy = energy_mse(pred, test, *opt.energy);
    report.energy_name = opt.energy->name();
  }
  if (predictions) *predictions = std::move(pred);
  return report;
}

MetricReport evaluate(const Model& model, std::span<const Trajectory> test,
                      const EvalOptions& options, std::vector<Trajectory>* predictions) {
  return evaluate(model_field(model), to_string(kind_of(model)), test, options, predictions);
}

Trajectory simulate_stand_in(const ExperimentConfig& config) {
  const StandInConfig& s = config.data.stand_in;
  DatasetSpec spec;
  spec.system = config.system;
  spec.count = 1;
  spec.length = s.rows - 1;
  spec.dt = config.data.dt;
  spec.sampler.kind = InitialSampler::Kind::fixed;
  spec.sampler.fixed = s.initial;
  spec.noise = NoiseSpec{s.noise_sigma, 0};
  spec.seed = config.data.seed;
  spec.stream = 2;
  return generate_dataset(spec).noisy.front();
}

ExperimentData build_experiment_data(const ExperimentConfig& config,
                                     const std::optional<std::string>& measured_path) {
  config.validate();
  ExperimentData data;
  if (config.data.source == DataConfig::Source::synthetic) {
    GeneratedDataset train = generate_dataset(config.train_spec());
    data.train = std::move(train.noisy);
    data.train_clean = std::move(train.clean);
    data.test = generate_dataset(config.test_spec()).clean;
    return data;
  }
  const Trajectory raw = measured_path ? read_measured(*measured_path) : simulate_stand_in(config);
  MeasuredSplit split = ingest_measured(raw, config.data.train_fraction);
  data.train = {split.train};
  data.train_clean = {split.train};
  data.test = {split.test};
  data.measured = std::move(split);
  return data;
}

TrainOptions train_options(const ExperimentConfig& config, const VariantConfig& variant) {
  TrainOptions o;
  o.epochs = config.training.epochs;
  o.learning_rate = config.training.learning_rate;
  o.minibatch = config.training.minibatch;
  o.seed = config.training.seed;
  o.solver = config.solver(variant);
  o.reversing = config.reversing;
  o.lambda = variant.lambda;
  return o;
}

EvalOptions eval_options(const ExperimentConfig& config, const VariantConfig& variant) {
  EvalOptions o;
  o.solver = config.solver(variant);
  o.energy = config.energy_function();
  o.experiment = config.experiment;
  o.variant = variant.name;
  o.seed = config.training.seed;
  return o;
}

std::uint64_t model_seed(const ExperimentConfig& config, const VariantConfig& variant) {
  return stream_seed(config.training.seed, 0x6d6f64656c,
                     static_cast<std::uint64_t>(variant.model));
}

TrainResult train_variant(const ExperimentConfig& config, const VariantConfig& variant,
                          const ExperimentData& data) {
  Model model = make_model(config.model_spec(variant), model_seed(config, variant));
  const auto segments = split_trajectories(data.train, config.data.max_segment_length);
  return train(std::move(model), segments, train_options(config, variant));
}

}  // namespace trs
