// trs: command-line driver for dataset generation, training, evaluation and
// diagnostics. Exit codes: 0 ok, 1 invalid input, 2 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trs/allocator.hpp"
#include "trs/training.hpp"

namespace fs = std::filesystem;
using namespace trs;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string data;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) {
    cfg.data.seed = *c.seed;
    cfg.training.seed = *c.seed;
  }
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  out << text << '\n';
}

std::vector<const VariantConfig*> select_variants(const ExperimentConfig& cfg,
                                                  const std::vector<std::string>& names) {
  std::vector<const VariantConfig*> out;
  if (names.empty()) {
    for (const auto& v : cfg.variants) out.push_back(&v);
  } else {
    for (const auto& n : names) out.push_back(&cfg.variant(n));
  }
  return out;
}

// Training data from --data (a `generate` output directory) or simulated.
ExperimentData load_data(const ExperimentConfig& cfg, const std::string& dir) {
  if (dir.empty()) return build_experiment_data(cfg);
  ExperimentData data;
  data.train = read_trajectories((fs::path(dir) / "train.csv").string());
  data.test = read_trajectories((fs::path(dir) / "test.csv").string());
  const fs::path clean = fs::path(dir) / "train_clean.csv";
  data.train_clean = fs::exists(clean) ? read_trajectories(clean.string()) : data.train;
  return data;
}

int cmd_generate(const Common& c) {
  const ExperimentConfig cfg = load(c);
  ensure_dir(c.out);
  const fs::path out(c.out);
  std::optional<std::string> measured;
  if (!c.data.empty()) measured = c.data;
  if (cfg.data.source == DataConfig::Source::measured && !measured) {
    const Trajectory raw = simulate_stand_in(cfg);
    write_measured((out / "measured.csv").string(), raw);
    measured = (out / "measured.csv").string();
  }
  const ExperimentData data = build_experiment_data(cfg, measured);
  write_trajectories((out / "train.csv").string(), data.train);
  write_trajectories((out / "train_clean.csv").string(), data.train_clean);
  write_trajectories((out / "test.csv").string(), data.test);
  if (data.measured) write_text(out / "metadata.json", data.measured->metadata_json());
  std::cout << "wrote " << data.train.size() << " train and " << data.test.size()
            << " test trajectories to " << c.out << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::vector<std::string>& variants,
              std::optional<std::size_t> epochs, std::size_t log_every) {
  ExperimentConfig cfg = load(c);
  if (epochs) cfg.training.epochs = *epochs;
  ensure_dir(c.out);
  const ExperimentData data = load_data(cfg, c.data);
  for (const VariantConfig* v : select_variants(cfg, variants)) {
    Model model = make_model(cfg.model_spec(*v), model_seed(cfg, *v));
    const auto segments = split_trajectories(data.train, cfg.data.max_segment_length);
    TrainOptions opt = train_options(cfg, *v);
    if (log_every > 0) {
      opt.on_epoch = [&](const EpochRecord& r) {
        if (r.epoch % log_every == 0 || r.epoch + 1 == cfg.training.epochs) {
          std::cerr << v->name << " epoch " << r.epoch << " l_ode " << r.l_ode;
          if (r.l_trs) std::cerr << " l_trs " << *r.l_trs;
          std::cerr << " total " << r.total << '\n';
        }
      };
    }
    const TrainResult res = train(std::move(model), segments, opt);
    const fs::path out(c.out);
    save_checkpoint((out / (v->name + ".ckpt")).string(),
                    Checkpoint{res.model, cfg.experiment, v->name, cfg.training.seed,
                               cfg.training.epochs});
    write_loss_history((out / (v->name + "_loss.csv")).string(), res.history);
    std::cout << "trained " << v->name << " for " << cfg.training.epochs << " epochs\n";
  }
  return 0;
}

std::vector<std::string> checkpoints_for(const ExperimentConfig& cfg, const Common& c,
                                         const std::vector<std::string>& explicit_paths) {
  if (!explicit_paths.empty()) return explicit_paths;
  std::vector<std::string> out;
  for (const auto& v : cfg.variants) {
    const fs::path p = fs::path(c.out) / (v.name + ".ckpt");
    if (fs::exists(p)) out.push_back(p.string());
  }
  if (out.empty()) throw std::invalid_argument("no checkpoints found in '" + c.out + "'");
  return out;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& ckpts, bool save_predictions) {
  const ExperimentConfig cfg = load(c);
  ensure_dir(c.out);
  const ExperimentData data = load_data(cfg, c.data);
  for (const std::string& path : checkpoints_for(cfg, c, ckpts)) {
    const Checkpoint ck = load_checkpoint(path);
    const VariantConfig& v = cfg.variant(ck.variant);
    EvalOptions opt = eval_options(cfg, v);
    opt.seed = ck.seed;
    std::vector<Trajectory> pred;
    const MetricReport rep = evaluate(ck.model, data.test, opt, &pred);
    const fs::path out(c.out);
    write_text(out / (v.name + "_report.json"), report_to_json(rep));
    if (save_predictions) write_trajectories((out / (v.name + "_predictions.csv")).string(), pred);
    std::cout << v.name << ": trajectory MSE " << rep.trajectory.mean << " +- "
              << rep.trajectory.std;
    if (rep.energy) std::cout << ", energy MSE " << rep.energy->mean << " +- " << rep.energy->std;
    std::cout << ", diverged " << rep.divergence_count << '\n';
  }
  return 0;
}

int cmd_symmetry(const Common& c, const std::vector<std::string>& ckpts, bool ground_truth,
                 std::size_t steps, std::size_t samples) {
  const ExperimentConfig cfg = load(c);
  ensure_dir(c.out);
  const ExperimentData data = load_data(cfg, c.data);
  std::vector<State> init;
  for (std::size_t i = 0; i < std::min(samples, data.test.size()); ++i) {
    init.push_back(data.test[i].states.front());
  }
  const SolverConfig rk4{SolverMethod::rk4, cfg.data.dt};

  auto check = [&](const VectorField& f, const std::string& name, const SolverConfig& solver,
                   const HodenModel* hoden) {
    const RelativeError e = forward_backward_relative_error(f, init, steps, cfg.reversing, solver);
    nlohmann::json j{{"name", name},
                     {"steps", steps},
                     {"samples", init.size()},
                     {"solver", to_string(solver.method)},
                     {"forward_backward_relative_error", e.value},
                     {"zero_denominator", e.zero_denominator},
                     {"diverged", e.diverged}};
    if (hoden && hoden->half_dim() == 1) {
      const auto grid = linspace(0.0, 1.5, 151);
      const SymmetryGap g = hamiltonian_symmetry_gap(*hoden, 0.0, grid);
      j["hamiltonian_gap"] = {{"q", 0.0}, {"p", g.p}, {"gap", g.gap}, {"max_abs", g.max_abs}};
    }
    write_text(fs::path(c.out) / ("symmetry_" + name + ".json"), j.dump(2));
    std::cout << name << ": forward/backward relative error " << e.value << '\n';
  };

  if (ground_truth) check(system_field(cfg.system), "ground_truth", rk4, nullptr);
  if (!ground_truth || !ckpts.empty()) {
    for (const std::string& path : checkpoints_for(cfg, c, ckpts)) {
      const Checkpoint ck = load_checkpoint(path);
      const auto* h = std::get_if<HodenModel>(&ck.model);
      check(model_field(ck.model), ck.variant, cfg.solver(cfg.variant(ck.variant)), h);
    }
  }
  return 0;
}

int cmd_lyapunov(const Common& c, const std::vector<std::string>& ckpts, bool ground_truth,
                 std::size_t steps, std::size_t samples) {
  const ExperimentConfig cfg = load(c);
  ensure_dir(c.out);
  const ExperimentData data = load_data(cfg, c.data);
  std::vector<State> init;
  for (std::size_t i = 0; i < std::min(samples, data.test.size()); ++i) {
    init.push_back(data.test[i].states.front());
  }
  auto run = [&](const VectorField& f, const std::string& name, const SolverConfig& solver) {
    const LyapunovSeries s = lyapunov_ensemble(f, init, steps, solver, cfg.training.seed);
    std::ofstream out(fs::path(c.out) / ("lyapunov_" + name + ".csv"));
    out << "t,sigma\n";
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      out << format_double(s.times[i]) << ',' << format_double(s.sigma[i]) << '\n';
    }
    std::cout << name << ": sigma(t_end) = " << s.sigma.back() << '\n';
  };
  if (ground_truth) run(system_field(cfg.system), "ground_truth", {SolverMethod::rk4, cfg.data.dt});
  if (!ground_truth || !ckpts.empty()) {
    for (const std::string& path : checkpoints_for(cfg, c, ckpts)) {
      const Checkpoint ck = load_checkpoint(path);
      run(model_field(ck.model), ck.variant, cfg.solver(cfg.variant(ck.variant)));
    }
  }
  return 0;
}

int cmd_report(const std::string& reports_dir, const std::string& out_dir) {
  std::vector<MetricReport> reports;
  for (const auto& entry : fs::recursive_directory_iterator(reports_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !name.ends_with("_report.json")) continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    reports.push_back(report_from_json(ss.str()));
  }
  if (reports.empty()) throw std::invalid_argument("no *_report.json files under '" + reports_dir + "'");
  std::sort(reports.begin(), reports.end(), [](const MetricReport& a, const MetricReport& b) {
    return std::tie(a.experiment, a.variant, a.seed) < std::tie(b.experiment, b.variant, b.seed);
  });
  ensure_dir(out_dir);

  auto x100 = [](double v) { return format_double(100.0 * v); };
  std::ofstream t(fs::path(out_dir) / "table.csv");
  t << "experiment,variant,model,seed,trajectory_mse_x100,trajectory_std_x100,energy_mse_x100,"
       "energy_std_x100,divergences\n";
  for (const MetricReport& r : reports) {
    t << r.experiment << ',' << r.variant << ',' << r.model << ',' << r.seed << ','
      << x100(r.trajectory.mean) << ',' << x100(r.trajectory.std) << ','
      << (r.energy ? x100(r.energy->mean) : "") << ',' << (r.energy ? x100(r.energy->std) : "")
      << ',' << r.divergence_count << '\n';
  }

  // Spread across training seeds of the per-run means.
  std::map<std::pair<std::string, std::string>, std::vector<const MetricReport*>> groups;
  for (const MetricReport& r : reports) groups[{r.experiment, r.variant}].push_back(&r);
  std::ofstream s(fs::path(out_dir) / "table_by_seed.csv");
  s << "experiment,variant,runs,trajectory_mse_x100,trajectory_seed_std_x100,energy_mse_x100,"
       "energy_seed_std_x100\n";
  for (const auto& [key, runs] : groups) {
    std::vector<double> traj, energy;
    for (const MetricReport* r : runs) {
      traj.push_back(r->trajectory.mean);
      if (r->energy) energy.push_back(r->energy->mean);
    }
    const ErrorSummary ts = summarize(traj);
    s << key.first << ',' << key.second << ',' << runs.size() << ',' << x100(ts.mean) << ','
      << x100(ts.std) << ',';
    if (energy.size() == runs.size()) {
      const ErrorSummary es = summarize(energy);
      s << x100(es.mean) << ',' << x100(es.std);
    } else {
      s << ',';
    }
    s << '\n';
  }
  std::cout << "collated " << reports.size() << " reports into " << out_dir << '\n';
  return 0;
}

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
  auto* opt = app->add_option("--config", c.config, "Experiment config JSON");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override data and training seeds");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--data", c.data,
                  "Dataset directory from `generate` (generate: measured CSV t,q1,p1,q2,p2)");
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Time-reversal-symmetric ODE network toolkit"};
  app.require_subcommand(1);

  Common c;
  std::vector<std::string> variants, ckpts;
  std::optional<std::size_t> epochs;
  std::size_t log_every = 100;
  bool save_predictions = false;
  bool ground_truth = false;
  std::size_t steps = 200, samples = 50;
  std::string reports_dir;

  auto* gen = app.add_subcommand("generate", "Write train/test trajectory CSVs");
  add_common(gen, c);

  auto* tr = app.add_subcommand("train", "Train variants; writes <variant>.ckpt and <variant>_loss.csv");
  add_common(tr, c);
  tr->add_option("--variant", variants, "Variant name(s); default all");
  tr->add_option("--epochs", epochs, "Override training.epochs");
  tr->add_option("--log-every", log_every, "Progress interval in epochs (0 = quiet)");

  auto* ev = app.add_subcommand("evaluate", "Roll out checkpoints on the test set; writes <variant>_report.json");
  add_common(ev, c);
  ev->add_option("--checkpoint", ckpts, "Checkpoint file(s); default <out>/<variant>.ckpt");
  ev->add_flag("--predictions", save_predictions, "Also write predicted trajectories");

  auto* sym = app.add_subcommand("symmetry-check", "Forward/backward symmetry error and Hamiltonian gap");
  add_common(sym, c);
  sym->add_option("--checkpoint", ckpts, "Checkpoint file(s)");
  sym->add_flag("--ground-truth", ground_truth, "Check the true system");
  sym->add_option("--steps", steps, "Rollout steps");
  sym->add_option("--samples", samples, "Number of test initial states");

  auto* ly = app.add_subcommand("lyapunov", "Finite-time Lyapunov exponent series");
  add_common(ly, c);
  ly->add_option("--checkpoint", ckpts, "Checkpoint file(s)");
  ly->add_flag("--ground-truth", ground_truth, "Use the true system");
  ly->add_option("--steps", steps, "Horizon in steps");
  ly->add_option("--samples", samples, "Ensemble size");

  auto* rep = app.add_subcommand("report", "Collate *_report.json files into table CSVs");
  rep->add_option("--reports", reports_dir, "Directory searched recursively")->required();
  rep->add_option("--out", c.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(c);
    if (*tr) return cmd_train(c, variants, epochs, log_every);
    if (*ev) return cmd_evaluate(c, ckpts, save_predictions);
    if (*sym) return cmd_symmetry(c, ckpts, ground_truth, steps, samples);
    if (*ly) return cmd_lyapunov(c, ckpts, ground_truth, steps, samples);
    if (*rep) return cmd_report(reports_dir, c.out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
