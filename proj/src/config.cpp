#include "trs/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace trs {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: " + field + ": " + why);
}

void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) fail(field, "must be finite");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where.empty() ? "document" : where, "must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) fail(where.empty() ? key : where + "." + key, "unknown key");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

std::string energy_name(EnergyKind k) {
  switch (k) {
    case EnergyKind::none: return "none";
    case EnergyKind::quadratic: return "quadratic";
    case EnergyKind::duffing: return "duffing";
  }
  return "?";
}

EnergyKind energy_from(const std::string& s) {
  if (s == "none") return EnergyKind::none;
  if (s == "quadratic") return EnergyKind::quadratic;
  if (s == "duffing") return EnergyKind::duffing;
  fail("energy", "unknown energy '" + s + "' (none, quadratic, duffing)");
}

std::string sampler_name(InitialSampler::Kind k) {
  switch (k) {
    case InitialSampler::Kind::annulus: return "annulus";
    case InitialSampler::Kind::fixed_xy_uniform_z: return "fixed_xy_uniform_z";
    case InitialSampler::Kind::fixed: return "fixed";
  }
  return "?";
}

SystemSpec parse_system(const json& j) {
  SystemSpec s;
  const std::string where = "system";
  try {
    s.kind = system_kind_from_string(get<std::string>(j, "kind", where));
  } catch (const std::invalid_argument& e) {
    fail("system.kind", e.what());
  }
  switch (s.kind) {
    case SystemKind::duffing:
      reject_unknown(j, where, {"kind", "alpha", "beta", "gamma", "delta"});
      s.duffing.alpha = get_or(j, "alpha", 0.0, where);
      s.duffing.beta = get_or(j, "beta", 0.0, where);
      s.duffing.gamma = get_or(j, "gamma", 0.0, where);
      s.duffing.delta = get_or(j, "delta", 0.0, where);
      break;
    case SystemKind::attractor:
      reject_unknown(j, where, {"kind"});
      break;
    case SystemKind::coupled_oscillators:
      reject_unknown(j, where, {"kind", "k1", "k2", "coupling", "damping"});
      s.coupled.k1 = get_or(j, "k1", s.coupled.k1, where);
      s.coupled.k2 = get_or(j, "k2", s.coupled.k2, where);
      s.coupled.coupling = get_or(j, "coupling", s.coupled.coupling, where);
      s.coupled.damping = get_or(j, "damping", s.coupled.damping, where);
      break;
  }
  return s;
}

InitialSampler parse_sampler(const json& j) {
  const std::string where = "data.sampler";
  InitialSampler s;
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "annulus") {
    reject_unknown(j, where, {"kind", "r_min", "r_max"});
    s.kind = InitialSampler::Kind::annulus;
    s.r_min = get<double>(j, "r_min", where);
    s.r_max = get<double>(j, "r_max", where);
  } else if (kind == "fixed_xy_uniform_z") {
    reject_unknown(j, where, {"kind", "x", "y", "z_min", "z_max"});
    s.kind = InitialSampler::Kind::fixed_xy_uniform_z;
    s.x = get_or(j, "x", 0.0, where);
    s.y = get_or(j, "y", 0.0, where);
    s.z_min = get<double>(j, "z_min", where);
    s.z_max = get<double>(j, "z_max", where);
  } else if (kind == "fixed") {
    reject_unknown(j, where, {"kind", "state"});
    s.kind = InitialSampler::Kind::fixed;
    s.fixed = get<std::vector<double>>(j, "state", where);
  } else {
    fail(where + ".kind", "unknown sampler '" + kind + "'");
  }
  return s;
}

json sampler_json(const InitialSampler& s) {
  json j{{"kind", sampler_name(s.kind)}};
  switch (s.kind) {
    case InitialSampler::Kind::annulus:
      j["r_min"] = s.r_min;
      j["r_max"] = s.r_max;
      break;
    case InitialSampler::Kind::fixed_xy_uniform_z:
      j["x"] = s.x;
      j["y"] = s.y;
      j["z_min"] = s.z_min;
      j["z_max"] = s.z_max;
      break;
    case InitialSampler::Kind::fixed:
      j["state"] = s.fixed;
      break;
  }
  return j;
}

DataConfig parse_data(const json& j) {
  const std::string where = "data";
  reject_unknown(j, where, {"source", "dt", "train", "test", "noise_sigma", "sampler", "seed",
                            "max_segment_length", "train_fraction", "stand_in"});
  DataConfig d;
  const auto source = get_or<std::string>(j, "source", "synthetic", where);
  if (source == "synthetic") {
    d.source = DataConfig::Source::synthetic;
  } else if (source == "measured") {
    d.source = DataConfig::Source::measured;
  } else {
    fail("data.source", "unknown source '" + source + "' (synthetic, measured)");
  }
  d.dt = get<double>(j, "dt", where);
  d.seed = get_or<std::uint64_t>(j, "seed", 0, where);
  d.max_segment_length = get_or<std::size_t>(j, "max_segment_length", 10, where);
  if (d.source == DataConfig::Source::synthetic) {
    const json& train = j.at("train");
    const json& test = j.at("test");
    reject_unknown(train, "data.train", {"count", "length"});
    reject_unknown(test, "data.test", {"count", "length"});
    d.train_count = get<std::size_t>(train, "count", "data.train");
    d.train_length = get<std::size_t>(train, "length", "data.train");
    d.test_count = get<std::size_t>(test, "count", "data.test");
    d.test_length = get<std::size_t>(test, "length", "data.test");
    d.noise_sigma = get_or(j, "noise_sigma", 0.0, where);
    if (!j.contains("sampler")) fail("data.sampler", "missing");
    d.sampler = parse_sampler(j.at("sampler"));
  } else {
    d.train_fraction = get_or(j, "train_fraction", 0.6, where);
    if (j.contains("stand_in")) {
      const json& s = j.at("stand_in");
      reject_unknown(s, "data.stand_in", {"rows", "noise_sigma", "initial"});
      d.stand_in.rows = get_or<std::size_t>(s, "rows", d.stand_in.rows, "data.stand_in");
      d.stand_in.noise_sigma = get_or(s, "noise_sigma", d.stand_in.noise_sigma, "data.stand_in");
      d.stand_in.initial =
          get_or<std::vector<double>>(s, "initial", d.stand_in.initial, "data.stand_in");
    }
  }
  return d;
}

ReversingOperator parse_reversing(const json& j, std::size_t dim) {
  const std::string where = "reversing_operator";
  reject_unknown(j, where, {"kind", "signs", "time_offset"});
  const auto kind = get<std::string>(j, "kind", where);
  const double a = get_or(j, "time_offset", 0.0, where);
  try {
    switch (reversing_kind_from_string(kind)) {
      case ReversingOperator::Kind::momentum_flip:
        return ReversingOperator::momentum_flip(dim, a);
      case ReversingOperator::Kind::full_negation:
        return ReversingOperator::full_negation(dim, a);
      case ReversingOperator::Kind::custom:
        return ReversingOperator::custom(get<std::vector<double>>(j, "signs", where), a);
    }
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  fail(where, "unreachable");
}

LambdaSchedule parse_lambda(const json& j, const std::string& where) {
  LambdaSchedule l;
  if (j.is_number()) {
    l.coefficient = j.get<double>();
    return l;
  }
  reject_unknown(j, where, {"kind", "coefficient"});
  try {
    l.kind = lambda_kind_from_string(get<std::string>(j, "kind", where));
  } catch (const std::invalid_argument& e) {
    fail(where + ".kind", e.what());
  }
  l.coefficient = get<double>(j, "coefficient", where);
  return l;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    fail("schema_version", "expected " + std::to_string(kConfigSchemaVersion) + ", got " +
                               std::to_string(schema_version));
  }
  if (experiment.empty()) fail("experiment", "must be non-empty");

  const DuffingParams& dp = system.duffing;
  for (double v : {dp.alpha, dp.beta, dp.gamma, dp.delta}) require_finite(v, "system");
  const CoupledOscillatorParams& cp = system.coupled;
  for (double v : {cp.k1, cp.k2, cp.coupling, cp.damping}) require_finite(v, "system");
  const std::size_t dim = system.dim();

  if (!(data.dt > 0.0) || !std::isfinite(data.dt)) fail("data.dt", "must be > 0");
  if (data.max_segment_length < 2) fail("data.max_segment_length", "must be >= 2");
  if (data.source == DataConfig::Source::synthetic) {
    if (data.train_count < 1) fail("data.train.count", "must be >= 1");
    if (data.test_count < 1) fail("data.test.count", "must be >= 1");
    if (data.train_length < 2) fail("data.train.length", "must be >= 2");
    if (data.test_length < 2) fail("data.test.length", "must be >= 2");
    if (!(data.noise_sigma >= 0.0) || !std::isfinite(data.noise_sigma)) {
      fail("data.noise_sigma", "must be >= 0");
    }
    const InitialSampler& s = data.sampler;
    switch (s.kind) {
      case InitialSampler::Kind::annulus:
        if (dim != 2) fail("data.sampler", "annulus needs a 2D system");
        if (!(s.r_min >= 0.0) || !(s.r_max > s.r_min)) {
          fail("data.sampler", "annulus needs 0 <= r_min < r_max");
        }
        break;
      case InitialSampler::Kind::fixed_xy_uniform_z:
        if (dim != 3) fail("data.sampler", "fixed_xy_uniform_z needs a 3D system");
        if (!(s.z_max > s.z_min)) fail("data.sampler", "needs z_min < z_max");
        break;
      case InitialSampler::Kind::fixed:
        if (s.fixed.size() != dim) fail("data.sampler.state", "dimension mismatch");
        break;
    }
  } else {
    if (system.kind != SystemKind::coupled_oscillators) {
      fail("data.source", "measured data is only defined for coupled_oscillators");
    }
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
      fail("data.train_fraction", "must lie in (0, 1)");
    }
    if (data.stand_in.rows < 4) fail("data.stand_in.rows", "must be >= 4");
    if (!(data.stand_in.noise_sigma >= 0.0)) fail("data.stand_in.noise_sigma", "must be >= 0");
    if (data.stand_in.initial.size() != dim) fail("data.stand_in.initial", "dimension mismatch");
  }

  if (reversing.dim() != dim) {
    fail("reversing_operator", "dimension " + std::to_string(reversing.dim()) +
                                   " does not match system dimension " + std::to_string(dim));
  }
  try {
    reversing.validate();
  } catch (const std::invalid_argument& e) {
    fail("reversing_operator", e.what());
  }

  if (!(training.learning_rate > 0.0) || !std::isfinite(training.learning_rate)) {
    fail("training.learning_rate", "must be > 0");
  }
  if (training.minibatch && *training.minibatch < 1) fail("training.batch", "must be >= 1");

  if (!system.autonomous() && !time_augmented) {
    fail("time_augmented", "the system is driven (non-autonomous); models must take time as input");
  }
  if (energy == EnergyKind::duffing && system.kind != SystemKind::duffing) {
    fail("energy", "duffing energy needs a duffing system");
  }
  if (energy != EnergyKind::none && dim % 2 != 0) {
    fail("energy", "closed-form energies need (q, p) halves");
  }

  if (variants.empty()) fail("variants", "at least one variant is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const VariantConfig& v = variants[i];
    const std::string where = "variants[" + std::to_string(i) + "]";
    if (v.name.empty()) fail(where + ".name", "must be non-empty");
    if (!names.insert(v.name).second) fail(where + ".name", "duplicate name '" + v.name + "'");
    if (v.hidden.empty()) fail(where + ".hidden", "needs at least one layer");
    for (std::size_t h : v.hidden) {
      if (h == 0) fail(where + ".hidden", "widths must be >= 1");
    }
    if (v.model == ModelKind::hoden && dim % 2 != 0) {
      fail(where + ".model", "hoden needs an even-dimensional system");
    }
    if (v.solver == SolverMethod::leapfrog) {
      if (time_augmented) fail(where + ".solver", "leapfrog is forbidden with time-augmented models");
      if (v.model != ModelKind::hoden) {
        fail(where + ".solver", "leapfrog needs a separable Hamiltonian (hoden) model");
      }
    }
    if (!std::isfinite(v.lambda.coefficient) || v.lambda.coefficient < 0.0) {
      fail(where + ".lambda", "coefficient must be finite and >= 0");
    }
  }
}

const VariantConfig& ExperimentConfig::variant(const std::string& name) const {
  for (const VariantConfig& v : variants) {
    if (v.name == name) return v;
  }
  std::string known;
  for (const VariantConfig& v : variants) known += (known.empty() ? "" : ", ") + v.name;
  throw std::invalid_argument("unknown variant '" + name + "' (have: " + known + ")");
}

ModelSpec ExperimentConfig::model_spec(const VariantConfig& v) const {
  return ModelSpec{v.model, system.dim(), v.hidden, time_augmented};
}

SolverConfig ExperimentConfig::solver(const VariantConfig& v) const {
  return SolverConfig{v.solver, data.dt};
}

DatasetSpec ExperimentConfig::train_spec() const {
  DatasetSpec s;
  s.system = system;
  s.count = data.train_count;
  s.length = data.train_length;
  s.dt = data.dt;
  s.sampler = data.sampler;
  s.noise = NoiseSpec{data.noise_sigma, 0};
  s.seed = data.seed;
  s.stream = 0;
  return s;
}

DatasetSpec ExperimentConfig::test_spec() const {
  DatasetSpec s = train_spec();
  s.count = data.test_count;
  s.length = data.test_length;
  s.noise = NoiseSpec{0.0, 0};
  s.stream = 1;
  return s;
}

std::optional<EnergyFunction> ExperimentConfig::energy_function() const {
  switch (energy) {
    case EnergyKind::none: return std::nullopt;
    case EnergyKind::quadratic: return EnergyFunction::quadratic();
    case EnergyKind::duffing: return EnergyFunction::duffing(system.duffing.alpha, system.duffing.beta);
  }
  return std::nullopt;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(j, "", {"schema_version", "experiment", "system", "data",
                               "reversing_operator", "training", "energy", "time_augmented",
                               "variants", "description"});
  ExperimentConfig c;
  c.schema_version = get<int>(j, "schema_version", "config");
  if (c.schema_version != kConfigSchemaVersion) {
    fail("schema_version", "expected " + std::to_string(kConfigSchemaVersion) + ", got " +
                               std::to_string(c.schema_version));
  }
  c.experiment = get<std::string>(j, "experiment", "config");
  if (!j.contains("system")) fail("system", "missing");
  c.system = parse_system(j.at("system"));
  if (!j.contains("data")) fail("data", "missing");
  c.data = parse_data(j.at("data"));
  if (!j.contains("reversing_operator")) fail("reversing_operator", "missing");
  c.reversing = parse_reversing(j.at("reversing_operator"), c.system.dim());

  if (!j.contains("training")) fail("training", "missing");
  const json& t = j.at("training");
  reject_unknown(t, "training", {"epochs", "learning_rate", "batch", "seed"});
  c.training.epochs = get<std::size_t>(t, "epochs", "training");
  c.training.learning_rate = get_or(t, "learning_rate", 2e-4, "training");
  c.training.seed = get_or<std::uint64_t>(t, "seed", 0, "training");
  if (t.contains("batch")) {
    const json& b = t.at("batch");
    if (b.is_string() && b.get<std::string>() == "full") {
      c.training.minibatch.reset();
    } else if (b.is_number_unsigned()) {
      c.training.minibatch = b.get<std::size_t>();
    } else {
      fail("training.batch", "must be \"full\" or a positive integer");
    }
  }

  c.energy = energy_from(get_or<std::string>(j, "energy", "none", "config"));
  c.time_augmented = get_or(j, "time_augmented", false, "config");

  if (!j.contains("variants") || !j.at("variants").is_array()) fail("variants", "must be an array");
  std::size_t i = 0;
  for (const json& v : j.at("variants")) {
    const std::string where = "variants[" + std::to_string(i++) + "]";
    reject_unknown(v, where, {"name", "model", "hidden", "solver", "lambda"});
    VariantConfig vc;
    vc.name = get<std::string>(v, "name", where);
    try {
      vc.model = model_kind_from_string(get<std::string>(v, "model", where));
      vc.solver = solver_method_from_string(get_or<std::string>(v, "solver", "rk4", where));
    } catch (const std::invalid_argument& e) {
      fail(where, e.what());
    }
    vc.hidden = get<std::vector<std::size_t>>(v, "hidden", where);
    if (v.contains("lambda")) vc.lambda = parse_lambda(v.at("lambda"), where + ".lambda");
    c.variants.push_back(std::move(vc));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = c.experiment;

  json sys{{"kind", to_string(c.system.kind)}};
  if (c.system.kind == SystemKind::duffing) {
    sys["alpha"] = c.system.duffing.alpha;
    sys["beta"] = c.system.duffing.beta;
    sys["gamma"] = c.system.duffing.gamma;
    sys["delta"] = c.system.duffing.delta;
  } else if (c.system.kind == SystemKind::coupled_oscillators) {
    sys["k1"] = c.system.coupled.k1;
    sys["k2"] = c.system.coupled.k2;
    sys["coupling"] = c.system.coupled.coupling;
    sys["damping"] = c.system.coupled.damping;
  }
  j["system"] = sys;

  json d;
  d["dt"] = c.data.dt;
  d["seed"] = c.data.seed;
  d["max_segment_length"] = c.data.max_segment_length;
  if (c.data.source == DataConfig::Source::synthetic) {
    d["source"] = "synthetic";
    d["train"] = {{"count", c.data.train_count}, {"length", c.data.train_length}};
    d["test"] = {{"count", c.data.test_count}, {"length", c.data.test_length}};
    d["noise_sigma"] = c.data.noise_sigma;
    d["sampler"] = sampler_json(c.data.sampler);
  } else {
    d["source"] = "measured";
    d["train_fraction"] = c.data.train_fraction;
    d["stand_in"] = {{"rows", c.data.stand_in.rows},
                     {"noise_sigma", c.data.stand_in.noise_sigma},
                     {"initial", c.data.stand_in.initial}};
  }
  j["data"] = d;

  json r{{"kind", to_string(c.reversing.kind)}, {"time_offset", c.reversing.time_offset}};
  if (c.reversing.kind == ReversingOperator::Kind::custom) r["signs"] = c.reversing.signs;
  j["reversing_operator"] = r;

  json t{{"epochs", c.training.epochs},
         {"learning_rate", c.training.learning_rate},
         {"seed", c.training.seed}};
  if (c.training.minibatch) {
    t["batch"] = *c.training.minibatch;
  } else {
    t["batch"] = "full";
  }
  j["training"] = t;
  j["energy"] = energy_name(c.energy);
  j["time_augmented"] = c.time_augmented;

  json vs = json::array();
  for (const VariantConfig& v : c.variants) {
    vs.push_back({{"name", v.name},
                  {"model", to_string(v.model)},
                  {"hidden", v.hidden},
                  {"solver", to_string(v.solver)},
                  {"lambda",
                   {{"kind", to_string(v.lambda.kind)}, {"coefficient", v.lambda.coefficient}}}});
  }
  j["variants"] = vs;
  return j.dump(2);
}

}  // namespace trs
