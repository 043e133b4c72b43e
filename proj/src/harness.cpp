#include "curveflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Geometry>
#include <json.hpp>

#include "curveflow/error.hpp"
#include "curveflow/geometry.hpp"

namespace curveflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ------------------------------------------------------------ text helpers

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(b, e, x);
  if (ec != std::errc() || ptr != e) throw ConfigError(key, "expected a number, got '" + v + "'");
  return x;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < -(1LL << 30) || x > (1LL << 30)) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

template <class E>
E parse_enum(const std::string& key, const std::string& v,
             std::initializer_list<std::pair<const char*, E>> names) {
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (v == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(key, "expected one of " + allowed + ", got '" + v + "'");
}

std::optional<double> parse_optional(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return parse_double(key, v);
}

std::string fmt_optional(const std::optional<double>& x) { return x ? fmt(*x) : "auto"; }

const char* init_name(InitKind k) {
  switch (k) {
    case InitKind::Circle: return "circle";
    case InitKind::Constant: return "constant";
    case InitKind::Cosine: return "cosine";
    case InitKind::State: return "state";
  }
  return "?";
}

const char* convergence_name(ConvergenceKind k) {
  switch (k) {
    case ConvergenceKind::Time: return "time";
    case ConvergenceKind::Space: return "space";
    case ConvergenceKind::Strong: return "strong";
  }
  return "?";
}

// ------------------------------------------------------------ config schema

struct KeySpec {
  const char* name;
  const char* doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"flow.kind", "willmore | curve_diffusion",
       [](const RunConfig& c) { return std::string(to_string(c.kind)); },
       [](RunConfig& c, const std::string& v) {
         c.kind = parse_enum<FlowKind>("flow.kind", v,
                                       {{"willmore", FlowKind::Willmore},
                                        {"curve_diffusion", FlowKind::CurveDiffusion}});
       }},
      {"flow.topology", "closed | open",
       [](const RunConfig& c) { return std::string(to_string(c.topology)); },
       [](RunConfig& c, const std::string& v) {
         c.topology = parse_enum<Topology>("flow.topology", v,
                                           {{"closed", Topology::Closed}, {"open", Topology::Open}});
       }},
      {"flow.transport", "arclength | dilation (reparametrisation term for f)",
       [](const RunConfig& c) { return std::string(to_string(c.transport)); },
       [](RunConfig& c, const std::string& v) {
         c.transport = parse_enum<Transport>(
             "flow.transport", v,
             {{"arclength", Transport::Arclength}, {"dilation", Transport::Dilation}});
       }},
      {"flow.winding", "turning number of a closed curve",
       [](const RunConfig& c) { return std::to_string(c.winding); },
       [](RunConfig& c, const std::string& v) { c.winding = parse_int("flow.winding", v); }},
      {"flow.flip_stiff_sign", "regression switch: reverse the fourth-order term",
       [](const RunConfig& c) { return std::string(c.flip_stiff_sign ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) {
         c.flip_stiff_sign = parse_bool("flow.flip_stiff_sign", v);
       }},
      {"grid.n", "number of nodes (even for closed curves, >= 8)",
       [](const RunConfig& c) { return std::to_string(c.n); },
       [](RunConfig& c, const std::string& v) { c.n = parse_int("grid.n", v); }},
      {"grid.dealias", "3/2-rule products",
       [](const RunConfig& c) { return std::string(c.dealias ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.dealias = parse_bool("grid.dealias", v); }},
      {"noise.mode", "scalar | spectral",
       [](const RunConfig& c) {
         return std::string(c.noise_mode == NoiseMode::Scalar ? "scalar" : "spectral");
       },
       [](RunConfig& c, const std::string& v) {
         c.noise_mode = parse_enum<NoiseMode>(
             "noise.mode", v, {{"scalar", NoiseMode::Scalar}, {"spectral", NoiseMode::Spectral}});
       }},
      {"noise.n_modes", "number of spectral basis functions",
       [](const RunConfig& c) { return std::to_string(c.n_modes); },
       [](RunConfig& c, const std::string& v) { c.n_modes = parse_int("noise.n_modes", v); }},
      {"noise.amplitude", "noise strength; 0 gives a deterministic run",
       [](const RunConfig& c) { return fmt(c.amplitude); },
       [](RunConfig& c, const std::string& v) {
         c.amplitude = parse_double("noise.amplitude", v);
       }},
      {"noise.decay_exponent", "spectral coefficients decay like m^-p",
       [](const RunConfig& c) { return fmt(c.decay_exponent); },
       [](RunConfig& c, const std::string& v) {
         c.decay_exponent = parse_double("noise.decay_exponent", v);
       }},
      {"noise.c4_bound", "upper bound on the summed C4 norms of the basis",
       [](const RunConfig& c) { return fmt(c.c4_bound); },
       [](RunConfig& c, const std::string& v) { c.c4_bound = parse_double("noise.c4_bound", v); }},
      {"init.kind", "circle | constant | cosine | state",
       [](const RunConfig& c) { return std::string(init_name(c.init)); },
       [](RunConfig& c, const std::string& v) {
         c.init = parse_enum<InitKind>("init.kind", v,
                                       {{"circle", InitKind::Circle},
                                        {"constant", InitKind::Constant},
                                        {"cosine", InitKind::Cosine},
                                        {"state", InitKind::State}});
       }},
      {"init.L0", "initial length",
       [](const RunConfig& c) { return fmt(c.L0); },
       [](RunConfig& c, const std::string& v) { c.L0 = parse_double("init.L0", v); }},
      {"init.value", "f for init.kind = constant",
       [](const RunConfig& c) { return fmt(c.init_value); },
       [](RunConfig& c, const std::string& v) { c.init_value = parse_double("init.value", v); }},
      {"init.mean", "mean of f for cosine; auto = 2 pi winding / L0 (closed) or 0 (open)",
       [](const RunConfig& c) { return fmt_optional(c.init_mean); },
       [](RunConfig& c, const std::string& v) { c.init_mean = parse_optional("init.mean", v); }},
      {"init.eps", "cosine amplitude: f = mean + eps cos(2 pi mode r)",
       [](const RunConfig& c) { return fmt(c.init_eps); },
       [](RunConfig& c, const std::string& v) { c.init_eps = parse_double("init.eps", v); }},
      {"init.mode", "cosine wavenumber",
       [](const RunConfig& c) { return std::to_string(c.init_mode); },
       [](RunConfig& c, const std::string& v) { c.init_mode = parse_int("init.mode", v); }},
      {"init.file", "trajectory file whose final state starts the run (init.kind = state)",
       [](const RunConfig& c) { return c.init_file; },
       [](RunConfig& c, const std::string& v) { c.init_file = v; }},
      {"stepper.scheme", "imex_em | heun_strat | explicit_em",
       [](const RunConfig& c) { return std::string(to_string(c.stepper.scheme)); },
       [](RunConfig& c, const std::string& v) {
         c.stepper.scheme = parse_enum<Scheme>("stepper.scheme", v,
                                               {{"imex_em", Scheme::ImexEM},
                                                {"heun_strat", Scheme::HeunStratonovich},
                                                {"explicit_em", Scheme::ExplicitEM}});
       }},
      {"stepper.dt", "time step",
       [](const RunConfig& c) { return fmt(c.stepper.dt); },
       [](RunConfig& c, const std::string& v) { c.stepper.dt = parse_double("stepper.dt", v); }},
      {"stepper.t_end", "final time",
       [](const RunConfig& c) { return fmt(c.stepper.t_end); },
       [](RunConfig& c, const std::string& v) {
         c.stepper.t_end = parse_double("stepper.t_end", v);
       }},
      {"stepper.snapshot_every", "steps between snapshots",
       [](const RunConfig& c) { return std::to_string(c.stepper.snapshot_every); },
       [](RunConfig& c, const std::string& v) {
         c.stepper.snapshot_every = parse_int("stepper.snapshot_every", v);
       }},
      {"stop.L_min", "stop when L falls below; auto = 1e-3 L0",
       [](const RunConfig& c) { return fmt_optional(c.L_min); },
       [](RunConfig& c, const std::string& v) { c.L_min = parse_optional("stop.L_min", v); }},
      {"stop.L_max", "stop when L exceeds; auto = 1e3 L0",
       [](const RunConfig& c) { return fmt_optional(c.L_max); },
       [](RunConfig& c, const std::string& v) { c.L_max = parse_optional("stop.L_max", v); }},
      {"stop.f_max", "stop when max |f| exceeds; auto = 1e3 max(1, max |f0|)",
       [](const RunConfig& c) { return fmt_optional(c.f_max); },
       [](RunConfig& c, const std::string& v) { c.f_max = parse_optional("stop.f_max", v); }},
      {"stop.check_turning", "require L0 int f = 2 pi winding for closed curves",
       [](const RunConfig& c) { return std::string(c.check_turning ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) {
         c.check_turning = parse_bool("stop.check_turning", v);
       }},
      {"seed", "master random seed",
       [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) {
         const long long s = parse_integer("seed", v);
         if (s < 0) throw ConfigError("seed", "must be >= 0");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"output.path", "trajectory or summary file",
       [](const RunConfig& c) { return c.output_path; },
       [](RunConfig& c, const std::string& v) { c.output_path = v; }},
      {"output.max_stored_values", "cap on f values stored per intermediate snapshot",
       [](const RunConfig& c) { return std::to_string(c.max_stored_values); },
       [](RunConfig& c, const std::string& v) {
         c.max_stored_values = parse_int("output.max_stored_values", v);
       }},
      {"ensemble.size", "number of trajectories",
       [](const RunConfig& c) { return std::to_string(c.ensemble_size); },
       [](RunConfig& c, const std::string& v) {
         c.ensemble_size = parse_int("ensemble.size", v);
       }},
      {"ensemble.paired", "also run every path with heun_strat on the same increments",
       [](const RunConfig& c) { return std::string(c.paired ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.paired = parse_bool("ensemble.paired", v); }},
      {"ensemble.trajectory_dir", "directory for per-trajectory files; empty = none",
       [](const RunConfig& c) { return c.trajectory_dir; },
       [](RunConfig& c, const std::string& v) { c.trajectory_dir = v; }},
      {"convergence.kind", "time | space | strong",
       [](const RunConfig& c) { return std::string(convergence_name(c.convergence)); },
       [](RunConfig& c, const std::string& v) {
         c.convergence = parse_enum<ConvergenceKind>("convergence.kind", v,
                                                     {{"time", ConvergenceKind::Time},
                                                      {"space", ConvergenceKind::Space},
                                                      {"strong", ConvergenceKind::Strong}});
       }},
      {"convergence.levels", "comma-separated dt values (time, strong) or n values (space)",
       [](const RunConfig& c) {
         std::string out;
         for (double x : c.levels) out += (out.empty() ? "" : ",") + fmt(x);
         return out;
       },
       [](RunConfig& c, const std::string& v) {
         c.levels.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           item = trim(item);
           if (!item.empty()) c.levels.push_back(parse_double("convergence.levels", item));
         }
       }},
      {"convergence.paths", "coupled paths for the strong test",
       [](const RunConfig& c) { return std::to_string(c.paths); },
       [](RunConfig& c, const std::string& v) { c.paths = parse_int("convergence.paths", v); }},
  };
  return keys;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& spec : schema()) {
    if (key == spec.name) {
      spec.set(cfg, value);
      return;
    }
  }
  throw ConfigError(key, "unknown key");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  return parse_config(in);
}

void print_config(std::ostream& out, const RunConfig& cfg) {
  for (const auto& spec : schema()) {
    out << "# " << spec.doc << '\n' << spec.name << " = " << spec.get(cfg) << '\n';
  }
}

void RunConfig::validate() const {
  if (topology == Topology::Closed && (n < 8 || n % 2 != 0)) {
    throw ConfigError("grid.n", "closed grids need an even n >= 8");
  }
  if (topology == Topology::Open && n < 8) throw ConfigError("grid.n", "must be >= 8");
  if (!(L0 > 0.0) || !std::isfinite(L0)) throw ConfigError("init.L0", "must be finite and > 0");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ConfigError("noise.amplitude", "must be finite and >= 0");
  }
  if (n_modes < 1) throw ConfigError("noise.n_modes", "must be >= 1");
  if (!(c4_bound > 0.0)) throw ConfigError("noise.c4_bound", "must be > 0");
  if (topology == Topology::Closed && winding == 0 && amplitude > 0.0 &&
      noise_mode == NoiseMode::Scalar) {
    throw ConfigError("flow.winding", "scalar noise on a closed curve needs a nonzero winding");
  }
  if (init == InitKind::State && init_file.empty()) {
    throw ConfigError("init.file", "required when init.kind = state");
  }
  if (!std::isfinite(init_value)) throw ConfigError("init.value", "must be finite");
  if (!std::isfinite(init_eps)) throw ConfigError("init.eps", "must be finite");
  if (init_mean && !std::isfinite(*init_mean)) throw ConfigError("init.mean", "must be finite");
  stepper.validate();
  if (L_min && !(*L_min > 0.0)) throw ConfigError("stop.L_min", "must be > 0");
  if (L_max && !(*L_max > 0.0)) throw ConfigError("stop.L_max", "must be > 0");
  if (L_min && L_max && !(*L_min < *L_max)) {
    throw ConfigError("stop.L_max", "must exceed stop.L_min");
  }
  if (f_max && !(*f_max > 0.0)) throw ConfigError("stop.f_max", "must be > 0");
  if (max_stored_values < 1) throw ConfigError("output.max_stored_values", "must be >= 1");
  if (ensemble_size < 1) throw ConfigError("ensemble.size", "must be >= 1");
  if (paths < 1) throw ConfigError("convergence.paths", "must be >= 1");
  for (double x : levels) {
    if (!(x > 0.0)) throw ConfigError("convergence.levels", "levels must be positive");
  }
  if (amplitude > 0.0) make_noise(*this).check_summability(c4_bound);
}

std::shared_ptr<const Grid> make_grid(const RunConfig& cfg) {
  return std::make_shared<const Grid>(cfg.topology, cfg.n, cfg.dealias);
}

NoiseModel make_noise(const RunConfig& cfg) {
  if (cfg.noise_mode == NoiseMode::Scalar) return NoiseModel::scalar(cfg.amplitude);
  return NoiseModel::spectral(cfg.n_modes, cfg.amplitude, cfg.decay_exponent);
}

FlowOperator make_operator(const RunConfig& cfg) {
  FlowSpec spec;
  spec.kind = cfg.kind;
  spec.topology = cfg.topology;
  spec.transport = cfg.transport;
  spec.noise = make_noise(cfg);
  spec.winding = cfg.winding;
  spec.flip_stiff_sign = cfg.flip_stiff_sign;
  return FlowOperator(make_grid(cfg), std::move(spec));
}

State make_initial_state(const RunConfig& cfg, const Grid& grid) {
  const Field& r = grid.nodes();
  State s;
  s.L = cfg.L0;
  const double circle = kTwoPi * cfg.winding / cfg.L0;
  switch (cfg.init) {
    case InitKind::Circle:
      s.f = Field::Constant(grid.n(), circle);
      break;
    case InitKind::Constant:
      s.f = Field::Constant(grid.n(), cfg.init_value);
      break;
    case InitKind::Cosine: {
      const double mean =
          cfg.init_mean.value_or(cfg.topology == Topology::Closed ? circle : 0.0);
      s.f = mean + cfg.init_eps * (kTwoPi * cfg.init_mode * r).cos();
      break;
    }
    case InitKind::State: {
      Topology topo{};
      try {
        s = read_final_state(cfg.init_file, &topo);
      } catch (const std::exception& e) {
        throw ConfigError("init.file", e.what());
      }
      if (s.f.size() != grid.n() || topo != grid.topology()) {
        throw ConfigError("init.file", "state does not match grid.n / flow.topology");
      }
      s.t = 0.0;
      break;
    }
  }
  return s;
}

StopCriteria make_stop(const RunConfig& cfg, const State& initial) {
  StopCriteria stop = StopCriteria::defaults_for(initial, cfg.stepper.t_end);
  if (cfg.L_min) stop.L_min = *cfg.L_min;
  if (cfg.L_max) stop.L_max = *cfg.L_max;
  if (cfg.f_max) stop.f_max = *cfg.f_max;
  try {
    stop.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), "inconsistent with the initial state");
  }
  return stop;
}

double circle_law_length(double L0, int winding, double t) {
  const double R0 = L0 / (kTwoPi * std::abs(winding));
  return L0 * std::pow(1.0 + 2.0 * t / std::pow(R0, 4), 0.25);
}

// ------------------------------------------------------------------ records

SnapshotRecord make_record(const Snapshot& snap, Topology topology, int max_stored_values,
                           bool final, const std::string& status) {
  SnapshotRecord rec;
  rec.t = snap.state.t;
  rec.L = snap.state.L;
  rec.n = static_cast<int>(snap.state.f.size());
  rec.stride = final || rec.n <= max_stored_values
                   ? 1
                   : (rec.n + max_stored_values - 1) / max_stored_values;
  for (int j = 0; j < rec.n; j += rec.stride) rec.f.push_back(snap.state.f[j]);
  rec.turning = snap.diagnostics.turning;
  rec.energy = snap.diagnostics.energy;
  rec.area = snap.diagnostics.area;
  rec.closure_defect = snap.diagnostics.closure_defect;
  rec.topology = to_string(topology);
  rec.status = status;
  rec.final = final;
  return rec;
}

std::string to_json_line(const SnapshotRecord& rec) {
  std::string s;
  s.reserve(64 + rec.f.size() * 25);
  auto opt = [](const std::optional<double>& x) { return x ? fmt17(*x) : std::string("null"); };
  s += "{\"t\":" + fmt17(rec.t) + ",\"L\":" + fmt17(rec.L) + ",\"n\":" + std::to_string(rec.n) +
       ",\"stride\":" + std::to_string(rec.stride) + ",\"f\":[";
  for (std::size_t i = 0; i < rec.f.size(); ++i) {
    if (i) s += ',';
    s += fmt17(rec.f[i]);
  }
  s += "],\"turning\":" + fmt17(rec.turning) + ",\"energy\":" + fmt17(rec.energy) +
       ",\"area\":" + opt(rec.area) + ",\"closure_defect\":" + opt(rec.closure_defect) +
       ",\"topology\":\"" + rec.topology + "\",\"status\":\"" + rec.status +
       "\",\"final\":" + (rec.final ? "true" : "false") + "}";
  return s;
}

SnapshotRecord parse_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  SnapshotRecord rec;
  rec.t = j.at("t").get<double>();
  rec.L = j.at("L").get<double>();
  rec.n = j.at("n").get<int>();
  rec.stride = j.at("stride").get<int>();
  rec.f = j.at("f").get<std::vector<double>>();
  rec.turning = j.at("turning").get<double>();
  rec.energy = j.at("energy").get<double>();
  if (!j.at("area").is_null()) rec.area = j.at("area").get<double>();
  if (!j.at("closure_defect").is_null()) rec.closure_defect = j.at("closure_defect").get<double>();
  rec.topology = j.value("topology", "closed");
  rec.status = j.at("status").get<std::string>();
  rec.final = j.at("final").get<bool>();
  return rec;
}

std::vector<SnapshotRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<SnapshotRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(parse_record(line));
  }
  return out;
}

State read_final_state(const std::filesystem::path& path, Topology* topology) {
  const auto records = read_records(path);
  if (records.empty()) throw std::runtime_error(path.string() + " holds no records");
  const SnapshotRecord& last = records.back();
  if (last.stride != 1 || static_cast<int>(last.f.size()) != last.n) {
    throw std::runtime_error(path.string() + ": last record is not full resolution");
  }
  State s;
  s.f = Eigen::Map<const Field>(last.f.data(), static_cast<Eigen::Index>(last.f.size()));
  s.L = last.L;
  s.t = last.t;
  if (topology) *topology = last.topology == "open" ? Topology::Open : Topology::Closed;
  return s;
}

// ----------------------------------------------------------------- simulate

int exit_code(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::ReachedT: return kExitOk;
    case TerminalStatus::NumericalFailure: return kExitNumerical;
    default: return kExitBlowUp;
  }
}

namespace {

std::vector<SnapshotRecord> to_records(const Trajectory& traj, Topology topology,
                                       int max_stored_values) {
  std::vector<SnapshotRecord> out;
  out.reserve(traj.snapshots.size());
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const bool final = i + 1 == traj.snapshots.size();
    out.push_back(make_record(traj.snapshots[i], topology, max_stored_values, final,
                              final ? to_string(traj.status) : "running"));
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<SnapshotRecord>& recs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : recs) out << to_json_line(r) << '\n';
}

struct Prepared {
  FlowOperator op;
  State state0;
  StopCriteria stop;
};

Prepared prepare(const RunConfig& cfg) {
  cfg.validate();
  FlowOperator op = make_operator(cfg);
  State s0 = make_initial_state(cfg, op.grid());
  StopCriteria stop = make_stop(cfg, s0);
  if (cfg.check_turning && cfg.topology == Topology::Closed) {
    const double turning = s0.L * op.grid().integrate(s0.f);
    if (std::abs(turning - kTwoPi * cfg.winding) > 1e-6) {
      throw ConfigError("init", "total turning " + fmt(turning) + " is not 2 pi * flow.winding");
    }
  }
  return {std::move(op), std::move(s0), stop};
}

Trajectory run_prepared(const Prepared& p, const RunConfig& cfg, Scheme scheme,
                        std::uint64_t index, bool geometry = true) {
  StepperConfig sc = cfg.stepper;
  sc.scheme = scheme;
  RunOptions opt;
  opt.seed = cfg.seed;
  opt.trajectory_index = index;
  opt.check_turning = cfg.check_turning;
  opt.geometry = geometry;
  return run(p.op, p.state0, sc, p.stop, opt);
}

}  // namespace

SimulationResult simulate(const RunConfig& cfg, const std::filesystem::path& out) {
  const Prepared p = prepare(cfg);
  SimulationResult res;
  res.trajectory = run_prepared(p, cfg, cfg.stepper.scheme, 0);
  res.records = to_records(res.trajectory, cfg.topology, cfg.max_stored_values);
  if (!out.empty()) write_records(out, res.records);
  return res;
}

// ----------------------------------------------------------------- ensemble

TrajectoryDigest digest(std::uint64_t index, TerminalStatus status,
                        const std::vector<SnapshotRecord>& records) {
  TrajectoryDigest d;
  d.index = index;
  d.status = status;
  for (const auto& r : records) {
    d.t.push_back(r.t);
    d.L.push_back(r.L);
    d.energy.push_back(r.energy);
  }
  return d;
}

SchemeSummary aggregate(const std::string& scheme, const std::vector<TrajectoryDigest>& runs) {
  SchemeSummary s;
  s.scheme = scheme;
  s.size = static_cast<int>(runs.size());

  // Reference time grid: the first trajectory that reached T, else the longest.
  const TrajectoryDigest* ref = nullptr;
  for (const auto& r : runs) {
    if (r.status == TerminalStatus::ReachedT) {
      ref = &r;
      break;
    }
    if (!ref || r.t.size() > ref->t.size()) ref = &r;
  }

  if (ref) {
    for (std::size_t k = 0; k < ref->t.size(); ++k) {
      TimeSeriesRow row;
      row.t = ref->t[k];
      double sum = 0.0, sum_e = 0.0;
      for (const auto& r : runs) {
        if (k < r.t.size() && r.t[k] == row.t) {
          ++row.count;
          sum += r.L[k];
          sum_e += r.energy[k];
        }
      }
      if (row.count == 0) continue;
      row.mean_L = sum / row.count;
      row.mean_energy = sum_e / row.count;
      double ss = 0.0;
      for (const auto& r : runs) {
        if (k < r.t.size() && r.t[k] == row.t) ss += (r.L[k] - row.mean_L) * (r.L[k] - row.mean_L);
      }
      row.var_L = row.count > 1 ? ss / (row.count - 1) : 0.0;
      row.stderr_L = row.count > 1 ? std::sqrt(row.var_L / row.count) : 0.0;
      s.series.push_back(row);
    }
  }

  double sum = 0.0, sum_e = 0.0;
  for (const auto& r : runs) {
    if (r.status != TerminalStatus::ReachedT || r.L.empty()) continue;
    ++s.reached;
    sum += r.L.back();
    sum_e += r.energy.back();
  }
  s.blowup_fraction = s.size ? static_cast<double>(s.size - s.reached) / s.size : 0.0;
  if (s.reached > 0) {
    s.mean_L_final = sum / s.reached;
    s.mean_energy_final = sum_e / s.reached;
    double ss = 0.0;
    for (const auto& r : runs) {
      if (r.status != TerminalStatus::ReachedT || r.L.empty()) continue;
      ss += (r.L.back() - s.mean_L_final) * (r.L.back() - s.mean_L_final);
    }
    s.var_L_final = s.reached > 1 ? ss / (s.reached - 1) : 0.0;
    s.stderr_L_final = s.reached > 1 ? std::sqrt(s.var_L_final / s.reached) : 0.0;
  }
  return s;
}

namespace {

std::filesystem::path trajectory_file(const std::filesystem::path& dir, const std::string& scheme,
                                      std::uint64_t index) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%06llu.jsonl", scheme.c_str(),
                static_cast<unsigned long long>(index));
  return dir / name;
}

TerminalStatus parse_status(const std::string& s) {
  for (auto st : {TerminalStatus::ReachedT, TerminalStatus::BlowUpCurvature,
                  TerminalStatus::BlowUpLengthZero, TerminalStatus::BlowUpLengthInfinite,
                  TerminalStatus::NumericalFailure}) {
    if (s == to_string(st)) return st;
  }
  throw std::runtime_error("unknown status '" + s + "'");
}

/// Runs body(i) for i in [0, count) on up to `workers` threads.
template <class Body>
void parallel_for(int count, int workers, Body body) {
  workers = std::clamp(workers, 1, std::max(1, count));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

SchemeSummary aggregate_files(const std::string& scheme, const std::filesystem::path& dir,
                              int size) {
  std::vector<TrajectoryDigest> runs;
  for (int i = 0; i < size; ++i) {
    const auto recs = read_records(trajectory_file(dir, scheme, i));
    const TerminalStatus st =
        recs.empty() ? TerminalStatus::NumericalFailure : parse_status(recs.back().status);
    runs.push_back(digest(i, st, recs));
  }
  return aggregate(scheme, runs);
}

EnsembleSummary run_ensemble(const RunConfig& cfg, int workers) {
  if (cfg.ensemble_size < 2) throw ConfigError("ensemble.size", "must be >= 2");
  const Prepared p = prepare(cfg);
  const int M = cfg.ensemble_size;
  const bool files = !cfg.trajectory_dir.empty();
  const std::filesystem::path dir = cfg.trajectory_dir;
  if (files) std::filesystem::create_directories(dir);

  const Scheme primary = cfg.paired ? Scheme::ImexEM : cfg.stepper.scheme;
  std::vector<TrajectoryDigest> first(M), second(cfg.paired ? M : 0);

  auto one = [&](Scheme scheme, int i) {
    const std::string name = to_string(scheme);
    try {
      const Trajectory traj = run_prepared(p, cfg, scheme, static_cast<std::uint64_t>(i));
      const auto recs = to_records(traj, cfg.topology, cfg.max_stored_values);
      if (files) write_records(trajectory_file(dir, name, i), recs);
      return digest(i, traj.status, recs);
    } catch (const std::exception&) {
      // A failed trajectory is recorded, never fatal to the ensemble.
      if (files) write_records(trajectory_file(dir, name, i), {});
      return digest(i, TerminalStatus::NumericalFailure, {});
    }
  };

  parallel_for(M, workers, [&](int i) {
    first[i] = one(primary, i);
    if (cfg.paired) second[i] = one(Scheme::HeunStratonovich, i);
  });

  EnsembleSummary out;
  out.seed = cfg.seed;
  out.size = M;
  out.dt = cfg.stepper.dt;
  out.t_end = cfg.stepper.t_end;
  out.primary = aggregate(to_string(primary), first);
  if (cfg.paired) {
    out.heun = aggregate(to_string(Scheme::HeunStratonovich), second);
    PairedSummary ps;
    ps.mean_gap = out.primary.mean_L_final - out.heun->mean_L_final;
    ps.pooled_stderr = std::hypot(out.primary.stderr_L_final, out.heun->stderr_L_final);
    double gap = 0.0;
    int count = 0;
    for (int i = 0; i < M; ++i) {
      if (first[i].status != TerminalStatus::ReachedT ||
          second[i].status != TerminalStatus::ReachedT) {
        continue;
      }
      gap += std::abs(first[i].L.back() - second[i].L.back());
      ++count;
    }
    ps.mean_abs_gap = count ? gap / count : 0.0;
    ps.tolerance = 3.0 * (ps.pooled_stderr + 5.0 * cfg.stepper.dt);
    ps.consistent = count > 0 && std::abs(ps.mean_gap) < ps.tolerance;
    out.paired = ps;
  }
  return out;
}

namespace {

nlohmann::ordered_json scheme_json(const SchemeSummary& s) {
  nlohmann::ordered_json j;
  j["scheme"] = s.scheme;
  j["size"] = s.size;
  j["reached"] = s.reached;
  j["blowup_fraction"] = s.blowup_fraction;
  j["mean_L_final"] = s.mean_L_final;
  j["var_L_final"] = s.var_L_final;
  j["stderr_L_final"] = s.stderr_L_final;
  j["mean_energy_final"] = s.mean_energy_final;
  auto& series = j["series"] = nlohmann::ordered_json::array();
  for (const auto& r : s.series) {
    series.push_back({{"t", r.t},
                      {"count", r.count},
                      {"mean_L", r.mean_L},
                      {"var_L", r.var_L},
                      {"stderr_L", r.stderr_L},
                      {"mean_energy", r.mean_energy}});
  }
  return j;
}

}  // namespace

std::string to_json(const EnsembleSummary& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["size"] = s.size;
  j["dt"] = s.dt;
  j["t_end"] = s.t_end;
  j["primary"] = scheme_json(s.primary);
  if (s.heun) j["heun"] = scheme_json(*s.heun);
  if (s.paired) {
    j["paired"] = {{"mean_gap", s.paired->mean_gap},
                   {"pooled_stderr", s.paired->pooled_stderr},
                   {"mean_abs_gap", s.paired->mean_abs_gap},
                   {"tolerance", s.paired->tolerance},
                   {"consistent", s.paired->consistent}};
  }
  return j.dump(2) + "\n";
}

std::string to_csv(const EnsembleSummary& s) {
  std::string out = "scheme,t,count,mean_L,var_L,stderr_L,mean_energy\n";
  auto rows = [&out](const SchemeSummary& sc) {
    for (const auto& r : sc.series) {
      out += sc.scheme + "," + fmt17(r.t) + "," + std::to_string(r.count) + "," +
             fmt17(r.mean_L) + "," + fmt17(r.var_L) + "," + fmt17(r.stderr_L) + "," +
             fmt17(r.mean_energy) + "\n";
    }
  };
  rows(s.primary);
  if (s.heun) rows(*s.heun);
  return out;
}

// -------------------------------------------------------------- convergence

namespace {

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

State final_state(const Trajectory& traj) {
  if (traj.status != TerminalStatus::ReachedT) {
    throw std::runtime_error(std::string("convergence run ended with ") + to_string(traj.status));
  }
  return traj.snapshots.back().state;
}

Trajectory run_deterministic(const RunConfig& cfg, const State& s0, double dt, int n) {
  RunConfig c = cfg;
  c.amplitude = 0.0;
  c.n = n;
  c.stepper.dt = dt;
  c.stepper.snapshot_every = 1 << 30;
  const FlowOperator op = make_operator(c);
  RunOptions opt;
  opt.check_turning = false;
  opt.geometry = false;
  return run(op, s0, c.stepper, make_stop(c, s0), opt);
}

// Smooth state with a slowly decaying spectrum and the configured turning.
State manufactured_state(const RunConfig& cfg, const Grid& grid) {
  constexpr double beta = 4.0;
  const double i0 = std::cyl_bessel_i(0.0, beta);
  const double mean = cfg.topology == Topology::Closed ? kTwoPi * cfg.winding / cfg.L0
                                                       : cfg.init_mean.value_or(0.0);
  const double scale = cfg.topology == Topology::Closed ? mean : 1.0;
  State s;
  s.L = cfg.L0;
  s.f = mean + 0.05 * scale * ((beta * (kTwoPi * grid.nodes()).sin()).exp() - i0) / i0;
  return s;
}

ConvergenceReport time_convergence(const RunConfig& cfg) {
  ConvergenceReport rep;
  rep.kind = ConvergenceKind::Time;
  rep.levels = cfg.levels.empty() ? std::vector<double>{4e-4, 2e-4, 1e-4} : cfg.levels;
  const FlowOperator op = make_operator(cfg);
  const State s0 = make_initial_state(cfg, op.grid());
  const double T = cfg.stepper.t_end;

  const bool circle = cfg.kind == FlowKind::Willmore && cfg.topology == Topology::Closed &&
                      (s0.f - s0.f[0]).abs().maxCoeff() == 0.0 &&
                      std::abs(s0.L * s0.f[0] - kTwoPi * cfg.winding) < 1e-12;
  std::optional<State> ref;
  if (circle) {
    rep.reference = "exact circle law";
  } else {
    const double dt_ref = *std::min_element(rep.levels.begin(), rep.levels.end()) / 4.0;
    ref = final_state(run_deterministic(cfg, s0, dt_ref, cfg.n));
    rep.reference = "run at dt = " + fmt(dt_ref);
  }
  for (double dt : rep.levels) {
    const State s = final_state(run_deterministic(cfg, s0, dt, cfg.n));
    if (circle) {
      const double exact = circle_law_length(s0.L, cfg.winding, T);
      rep.errors.push_back(std::abs(s.L - exact) / exact);
    } else {
      rep.errors.push_back(std::abs(s.L - ref->L) + (s.f - ref->f).abs().maxCoeff());
    }
  }
  return rep;
}

ConvergenceReport space_convergence(const RunConfig& cfg) {
  ConvergenceReport rep;
  rep.kind = ConvergenceKind::Space;
  rep.levels = cfg.levels.empty() ? std::vector<double>{16, 32, 64} : cfg.levels;
  const int n_max = static_cast<int>(*std::max_element(rep.levels.begin(), rep.levels.end()));
  const bool closed = cfg.topology == Topology::Closed;
  // Reference nodes must contain every level's nodes.
  const int n_ref = closed ? 2 * n_max : 2 * n_max - 1;
  auto run_at = [&](int n) {
    RunConfig c = cfg;
    c.n = n;
    c.validate();
    const auto grid = make_grid(c);
    return final_state(run_deterministic(cfg, manufactured_state(c, *grid), cfg.stepper.dt, n));
  };
  const State ref = run_at(n_ref);
  rep.reference = "run at n = " + std::to_string(n_ref);
  for (double level : rep.levels) {
    const int n = static_cast<int>(level);
    const int num = closed ? n_ref : n_ref - 1;
    const int den = closed ? n : n - 1;
    if (num % den != 0) {
      throw ConfigError("convergence.levels", "grid nodes must nest in the reference grid");
    }
    const int stride = num / den;
    const State s = run_at(n);
    double err = std::abs(s.L - ref.L);
    for (int j = 0; j < n; ++j) err = std::max(err, std::abs(s.f[j] - ref.f[j * stride]));
    rep.errors.push_back(err);
  }
  return rep;
}

ConvergenceReport strong_convergence(const RunConfig& cfg, int workers) {
  ConvergenceReport rep;
  rep.kind = ConvergenceKind::Strong;
  rep.levels = cfg.levels.empty() ? std::vector<double>{4e-3, 2e-3, 1e-3} : cfg.levels;
  if (!(cfg.amplitude > 0.0)) throw ConfigError("noise.amplitude", "strong test needs noise");
  const double dt_min = *std::min_element(rep.levels.begin(), rep.levels.end());
  const double dt_ref = dt_min / 4.0;
  const double T = cfg.stepper.t_end;
  const auto n_ref = static_cast<long long>(std::llround(T / dt_ref));
  std::vector<long long> ratio;
  for (double dt : rep.levels) {
    const double k = dt / dt_ref;
    if (std::abs(k - std::round(k)) > 1e-9 || n_ref % std::llround(k) != 0) {
      throw ConfigError("convergence.levels", "each dt must be a multiple of the reference step");
    }
    ratio.push_back(std::llround(k));
  }
  rep.reference = "coupled paths at dt = " + fmt(dt_ref);

  const Prepared p = prepare(cfg);
  const int modes = p.op.spec().noise.n_modes();
  std::vector<std::vector<double>> err(cfg.paths, std::vector<double>(rep.levels.size()));

  auto integrate_path = [&](const std::vector<std::vector<double>>& inc, double h,
                            std::uint64_t path) -> State {
    BrownianDriver bridge(cfg.seed, path, 1);
    State s = p.state0;
    for (const auto& dW : inc) {
      StepResult r = advance(cfg.stepper.scheme, p.op, s, h, dW, bridge);
      if (r.status != StepStatus::Ok) throw std::runtime_error("strong convergence path failed");
      s = std::move(r.state);
    }
    return s;
  };

  parallel_for(cfg.paths, workers, [&](int path) {
    BrownianDriver driver(cfg.seed, static_cast<std::uint64_t>(path), 0);
    std::vector<std::vector<double>> fine(n_ref);
    for (auto& dW : fine) dW = driver.increments(modes, dt_ref);
    const State ref = integrate_path(fine, dt_ref, path);
    for (std::size_t lv = 0; lv < rep.levels.size(); ++lv) {
      std::vector<std::vector<double>> coarse(n_ref / ratio[lv], std::vector<double>(modes, 0.0));
      for (long long i = 0; i < n_ref; ++i) {
        for (int m = 0; m < modes; ++m) coarse[i / ratio[lv]][m] += fine[i][m];
      }
      const State s = integrate_path(coarse, rep.levels[lv], path);
      err[path][lv] = std::abs(s.L - ref.L) + (s.f - ref.f).abs().maxCoeff();
    }
  });

  for (std::size_t lv = 0; lv < rep.levels.size(); ++lv) {
    double sum = 0.0;
    for (int path = 0; path < cfg.paths; ++path) sum += err[path][lv];
    rep.errors.push_back(sum / cfg.paths);
  }
  return rep;
}

}  // namespace

ConvergenceReport run_convergence(const RunConfig& cfg, int workers) {
  cfg.validate();
  if (!cfg.levels.empty() && cfg.levels.size() < 3) {
    throw ConfigError("convergence.levels", "at least 3 levels are required");
  }
  ConvergenceReport rep;
  switch (cfg.convergence) {
    case ConvergenceKind::Time: rep = time_convergence(cfg); break;
    case ConvergenceKind::Space: rep = space_convergence(cfg); break;
    case ConvergenceKind::Strong: rep = strong_convergence(cfg, workers); break;
  }
  std::vector<std::size_t> order(rep.levels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) {
              // Coarsest first: largest dt, or smallest n.
              return rep.kind == ConvergenceKind::Space ? rep.levels[a] < rep.levels[b]
                                                        : rep.levels[a] > rep.levels[b];
            });
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    rep.ratios.push_back(rep.errors[order[i]] / rep.errors[order[i + 1]]);
  }
  // Space levels are grid sizes: error falls as n grows, so the slope is negated.
  const double sgn = rep.kind == ConvergenceKind::Space ? -1.0 : 1.0;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    if (rep.errors[i] > 0.0) {
      x.push_back(rep.levels[i]);
      y.push_back(rep.errors[i]);
    }
  }
  rep.order = x.size() >= 2 ? sgn * slope(x, y) : 0.0;
  return rep;
}

std::string to_json(const ConvergenceReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = convergence_name(r.kind);
  j["reference"] = r.reference;
  j["levels"] = r.levels;
  j["errors"] = r.errors;
  j["ratios"] = r.ratios;
  j["order"] = r.order;
  return j.dump(2) + "\n";
}

// --------------------------------------------------------------- invariants

namespace {

Trajectory deterministic_run(const RunConfig& cfg, FlowKind kind, bool geometry,
                             State* initial = nullptr) {
  RunConfig c = cfg;
  c.kind = kind;
  c.amplitude = 0.0;
  c.stepper.snapshot_every = 1;
  const Prepared p = prepare(c);
  if (initial) *initial = p.state0;
  RunOptions opt;
  opt.check_turning = c.check_turning;
  opt.geometry = geometry;
  opt.keep_fields = false;
  return run(p.op, p.state0, c.stepper, p.stop, opt);
}

InvariantResult not_applicable(const std::string& name) {
  return {name, true, 0.0, 0.0, "not applicable to open curves"};
}

}  // namespace

std::vector<InvariantResult> run_invariants(const RunConfig& cfg) {
  cfg.validate();
  std::vector<InvariantResult> out;
  const bool closed = cfg.topology == Topology::Closed;
  const double target = kTwoPi * cfg.winding;

  const Trajectory willmore = deterministic_run(cfg, FlowKind::Willmore, false);
  const Trajectory diffusion = deterministic_run(cfg, FlowKind::CurveDiffusion, closed);

  if (closed) {
    InvariantResult r{"turning_number", false, 0.0, 1e-5, ""};
    for (const Trajectory* traj : {&willmore, &diffusion}) {
      for (const auto& snap : traj->snapshots) {
        r.value = std::max(r.value, std::abs(snap.diagnostics.turning - target));
      }
    }
    r.passed = r.value < r.tolerance && willmore.status == TerminalStatus::ReachedT &&
               diffusion.status == TerminalStatus::ReachedT;
    r.detail = "max |L int f - 2 pi winding| over both deterministic flows";
    out.push_back(r);
  } else {
    out.push_back(not_applicable("turning_number"));
  }

  {
    InvariantResult r{"energy_dissipation", false, 0.0, 1e-8, ""};
    const auto& snaps = willmore.snapshots;
    for (std::size_t k = 1; k < snaps.size(); ++k) {
      r.value = std::max(r.value, snaps[k].diagnostics.energy - snaps[k - 1].diagnostics.energy);
    }
    const double decrease = snaps.front().diagnostics.energy - snaps.back().diagnostics.energy;
    r.passed = willmore.status == TerminalStatus::ReachedT && r.value <= r.tolerance &&
               decrease > 0.0;
    r.detail = std::string("largest per-step energy increase; total decrease ") + fmt(decrease) +
               ", status " + to_string(willmore.status);
    out.push_back(r);
  }

  if (closed) {
    InvariantResult r{"area_conservation", false, 0.0, 1e-3, ""};
    const auto& snaps = diffusion.snapshots;
    const double a0 = *snaps.front().diagnostics.area;
    double length_increase = 0.0;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      r.value = std::max(r.value, std::abs(*snaps[k].diagnostics.area - a0) / std::abs(a0));
      if (k) {
        length_increase = std::max(length_increase,
                                   snaps[k].diagnostics.length - snaps[k - 1].diagnostics.length);
      }
    }
    r.passed = diffusion.status == TerminalStatus::ReachedT && r.value < r.tolerance &&
               length_increase <= 1e-8;
    r.detail = "max relative area drift under curve diffusion; largest length increase " +
               fmt(length_increase);
    out.push_back(r);
  } else {
    out.push_back(not_applicable("area_conservation"));
  }

  if (closed) {
    InvariantResult r{"diffusion_coefficient", false, 0.0, 1e-13, ""};
    RunConfig c = cfg;
    c.kind = FlowKind::Willmore;
    c.noise_mode = NoiseMode::Scalar;
    c.amplitude = 1.0;
    const FlowOperator op = make_operator(c);
    BrownianDriver rng(cfg.seed, 0, 7);
    for (int trial = 0; trial < 100; ++trial) {
      State s;
      s.L = 1.0 + 9.0 * std::abs(rng.standard_normal());
      s.f = Field::Constant(c.n, target / s.L);
      for (int m = 1; m <= 4; ++m) {
        const double a = 0.1 * rng.standard_normal() / s.L;
        const double b = 0.1 * rng.standard_normal() / s.L;
        s.f += a * (kTwoPi * m * op.grid().nodes()).cos() + b * (kTwoPi * m * op.grid().nodes()).sin();
      }
      const double bL = op.assemble_diffusion(s).front().b_L;
      r.value = std::max(r.value, std::abs(bL + target) / std::abs(target));
    }
    r.passed = r.value <= r.tolerance;
    r.detail = "relative deviation of b_L from -2 pi winding over 100 random states";
    out.push_back(r);
  } else {
    out.push_back(not_applicable("diffusion_coefficient"));
  }

  {
    InvariantResult r{"reconstruction_equivariance", false, 0.0, 1e-10, ""};
    const FlowOperator op = make_operator(cfg);
    const State s = make_initial_state(cfg, op.grid());
    const Point2 anchor(1.3, -0.7);
    const double rot = 0.9;
    const CurveSample a = reconstruct(op.grid(), s);
    const CurveSample b = reconstruct(op.grid(), s, anchor, rot);
    const Eigen::Rotation2Dd R(rot);
    for (std::size_t j = 0; j < a.points.size(); ++j) {
      r.value = std::max(r.value, (b.points[j] - (R * a.points[j] + anchor)).norm());
    }
    r.passed = r.value <= r.tolerance;
    r.detail = "max distance between moved reconstruction and moved points";
    out.push_back(r);
  }
  return out;
}

std::string to_json(const std::vector<InvariantResult>& results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    j.push_back({{"name", r.name},
                 {"passed", r.passed},
                 {"value", r.value},
                 {"tolerance", r.tolerance},
                 {"detail", r.detail}});
  }
  nlohmann::ordered_json doc;
  doc["passed"] = all;
  doc["checks"] = j;
  return doc.dump(2) + "\n";
}

}  // namespace curveflow
