#include "trs/dataio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace trs {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  throw std::invalid_argument("line " + std::to_string(line) + ": " + why);
}

double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    bad_line(line, "cannot parse number '" + std::string(s) + "'");
  }
  if (!std::isfinite(v)) bad_line(line, "non-finite value");
  return v;
}

std::uint64_t parse_uint(std::string_view s, std::size_t line) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    bad_line(line, "cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return in;
}

}  // namespace

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs) {
  const std::size_t dim = trajs.empty() ? 0 : trajs.front().dim();
  out << "traj_id,step,t";
  for (std::size_t c = 0; c < dim; ++c) out << ",c" << c;
  out << '\n';
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    if (trajs[k].dim() != dim) throw std::invalid_argument("trajectories differ in dimension");
    for (std::size_t i = 0; i < trajs[k].size(); ++i) {
      const State& s = trajs[k].states[i];
      out << k << ',' << i << ',' << format_double(s.time);
      for (double v : s.values) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

void write_trajectories(const std::string& path, std::span<const Trajectory> trajs) {
  auto out = open_out(path);
  write_trajectories(out, trajs);
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trajectory file");
  const auto header = split_csv(trim(line));
  if (header.size() < 4 || trim(header[0]) != "traj_id" || trim(header[1]) != "step" ||
      trim(header[2]) != "t") {
    bad_line(1, "expected header traj_id,step,t,c0,...");
  }
  const std::size_t dim = header.size() - 3;

  std::map<std::uint64_t, Trajectory> by_id;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(trim(line));
    if (fields.size() != header.size()) {
      bad_line(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    const std::uint64_t id = parse_uint(fields[0], line_no);
    const std::uint64_t step = parse_uint(fields[1], line_no);
    State s;
    s.time = parse_double(fields[2], line_no);
    s.values.reserve(dim);
    for (std::size_t c = 0; c < dim; ++c) s.values.push_back(parse_double(fields[3 + c], line_no));
    Trajectory& tr = by_id[id];
    if (step != tr.size()) {
      bad_line(line_no, "trajectory " + std::to_string(id) + " expects step " +
                            std::to_string(tr.size()) + ", got " + std::to_string(step));
    }
    if (!tr.states.empty() && !(s.time > tr.states.back().time)) {
      bad_line(line_no, "time does not increase within trajectory " + std::to_string(id));
    }
    tr.states.push_back(std::move(s));
  }
  std::vector<Trajectory> out;
  out.reserve(by_id.size());
  std::uint64_t expected = 0;
  for (auto& [id, tr] : by_id) {
    if (id != expected++) throw std::invalid_argument("trajectory ids are not contiguous from 0");
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_trajectories(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

Trajectory read_measured(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw std::invalid_argument("empty measured-data file");
  const auto header = split_csv(trim(line));
  const char* expected[] = {"t", "q1", "p1", "q2", "p2"};
  if (header.size() != 5) bad_line(1, "expected header t,q1,p1,q2,p2");
  for (std::size_t i = 0; i < 5; ++i) {
    if (trim(header[i]) != expected[i]) bad_line(1, "expected header t,q1,p1,q2,p2");
  }
  Trajectory tr;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(trim(line));
    if (f.size() != 5) bad_line(line_no, "expected 5 fields, got " + std::to_string(f.size()));
    State s;
    s.time = parse_double(f[0], line_no);
    const double q1 = parse_double(f[1], line_no);
    const double p1 = parse_double(f[2], line_no);
    const double q2 = parse_double(f[3], line_no);
    const double p2 = parse_double(f[4], line_no);
    s.values = {q1, q2, p1, p2};
    if (!tr.states.empty() && !(s.time > tr.states.back().time)) {
      bad_line(line_no, "time is not increasing");
    }
    tr.states.push_back(std::move(s));
  }
  if (tr.size() < 2) throw std::invalid_argument("measured data needs at least 2 rows");
  return tr;
}

Trajectory read_measured(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_measured(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_measured(std::ostream& out, const Trajectory& traj) {
  if (traj.dim() != 4) throw std::invalid_argument("measured data has 4 state components");
  out << "t,q1,p1,q2,p2\n";
  for (const State& s : traj.states) {
    out << format_double(s.time) << ',' << format_double(s.values[0]) << ','
        << format_double(s.values[2]) << ',' << format_double(s.values[1]) << ','
        << format_double(s.values[3]) << '\n';
  }
}

void write_measured(const std::string& path, const Trajectory& traj) {
  auto out = open_out(path);
  write_measured(out, traj);
}

State Normalization::apply(const State& s) const {
  State out = s;
  for (std::size_t c = 0; c < out.dim(); ++c) out.values[c] /= scale.at(c);
  return out;
}

State Normalization::invert(const State& s) const {
  State out = s;
  for (std::size_t c = 0; c < out.dim(); ++c) out.values[c] *= scale.at(c);
  return out;
}

Trajectory Normalization::apply(const Trajectory& t) const {
  Trajectory out;
  for (const State& s : t.states) out.states.push_back(apply(s));
  return out;
}

Trajectory Normalization::invert(const Trajectory& t) const {
  Trajectory out;
  for (const State& s : t.states) out.states.push_back(invert(s));
  return out;
}

std::string MeasuredSplit::metadata_json() const {
  json j;
  j["normalization"] = {{"method", "abs_max"}, {"scale", normalization.scale},
                        {"components", {"q1", "q2", "p1", "p2"}}};
  j["dt"] = dt;
  j["max_time_deviation"] = max_time_deviation;
  j["train_rows"] = train_rows;
  j["test_rows"] = test_rows;
  return j.dump(2);
}

MeasuredSplit ingest_measured(const Trajectory& raw, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  raw.validate();
  const std::size_t rows = raw.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows) + 1e-9));
  if (n_train < 2 || rows - n_train < 2) {
    throw std::invalid_argument("split leaves fewer than 2 rows on one side");
  }

  MeasuredSplit out;
  out.train_rows = n_train;
  out.test_rows = rows - n_train;
  const double t0 = raw.states.front().time;
  out.dt = (raw.states.back().time - t0) / static_cast<double>(rows - 1);
  for (std::size_t k = 0; k < rows; ++k) {
    const double grid = t0 + static_cast<double>(k) * out.dt;
    out.max_time_deviation = std::max(out.max_time_deviation, std::abs(raw.states[k].time - grid));
  }

  const std::size_t dim = raw.dim();
  out.normalization.scale.assign(dim, 0.0);
  for (std::size_t k = 0; k < n_train; ++k) {
    for (std::size_t c = 0; c < dim; ++c) {
      out.normalization.scale[c] = std::max(out.normalization.scale[c], std::abs(raw.states[k].values[c]));
    }
  }
  for (double& s : out.normalization.scale) {
    if (s == 0.0) s = 1.0;
  }

  for (std::size_t k = 0; k < rows; ++k) {
    State s = out.normalization.apply(raw.states[k]);
    s.time = t0 + static_cast<double>(k) * out.dt;
    (k < n_train ? out.train : out.test).states.push_back(std::move(s));
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'T', 'R', 'S', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::invalid_argument("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  validate_model(ckpt.model);
  const ModelSpec spec = spec_of(ckpt.model);
  const ModelParams params = flat_params(ckpt.model);
  json shapes = json::array();
  for (const Tensor& t : params.tensors) shapes.push_back({t.rows(), t.cols()});
  const json header{{"format", "trs-checkpoint"},
                    {"version", 1},
                    {"model",
                     {{"kind", to_string(spec.kind)},
                      {"state_dim", spec.state_dim},
                      {"hidden", spec.hidden},
                      {"time_augmented", spec.time_augmented}}},
                    {"tensors", shapes},
                    {"experiment", ckpt.experiment},
                    {"variant", ckpt.variant},
                    {"seed", ckpt.seed},
                    {"epochs", ckpt.epochs}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor& t : params.tensors) {
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::invalid_argument("not a checkpoint (bad magic)");
  }
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 26)) throw std::invalid_argument("checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw std::invalid_argument("checkpoint truncated");
  }
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("checkpoint header: ") + e.what());
  }
  const json& m = header.at("model");
  ModelSpec spec;
  spec.kind = model_kind_from_string(m.at("kind").get<std::string>());
  spec.state_dim = m.at("state_dim").get<std::size_t>();
  spec.hidden = m.at("hidden").get<std::vector<std::size_t>>();
  spec.time_augmented = m.at("time_augmented").get<bool>();

  Checkpoint ckpt;
  ckpt.model = make_model(spec, 0);
  ModelParams params;
  for (const json& shape : header.at("tensors")) {
    Tensor t(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());
    for (double& v : t.values()) v = std::bit_cast<double>(get_u64(in));
    params.tensors.push_back(std::move(t));
  }
  set_flat_params(ckpt.model, std::move(params));
  ckpt.experiment = header.value("experiment", "");
  ckpt.variant = header.value("variant", "");
  ckpt.seed = header.value("seed", std::uint64_t{0});
  ckpt.epochs = header.value("epochs", std::size_t{0});
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  try {
    return load_checkpoint(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_loss_history(const std::string& path, std::span<const EpochRecord> history) {
  auto out = open_out(path);
  out << "epoch,l_ode,l_trs,total\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << format_double(r.l_ode) << ','
        << (r.l_trs ? format_double(*r.l_trs) : std::string()) << ','
        << format_double(r.total) << '\n';
  }
}

}  // namespace trs
