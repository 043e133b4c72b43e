#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "curveflow/flows.hpp"
#include "curveflow/integrator.hpp"

namespace curveflow {

enum class InitKind { Circle, Constant, Cosine, State };
enum class ConvergenceKind { Time, Space, Strong };

/// Everything a run needs, loaded from flat `key = value` text.
/// `print_config` lists every key with its default.
struct RunConfig {
  FlowKind kind = FlowKind::Willmore;
  Topology topology = Topology::Closed;
  Transport transport = Transport::Arclength;
  int winding = 1;
  bool flip_stiff_sign = false;

  int n = 64;
  bool dealias = false;

  NoiseMode noise_mode = NoiseMode::Scalar;
  int n_modes = 8;
  double amplitude = 0.0;
  double decay_exponent = 6.0;
  double c4_bound = 1e6;

  InitKind init = InitKind::Cosine;
  double L0 = 6.283185307179586;
  double init_value = 1.0;
  std::optional<double> init_mean;  ///< unset: 2 pi winding / L0 (closed), 0 (open)
  double init_eps = 0.1;
  int init_mode = 2;
  std::string init_file;

  StepperConfig stepper{Scheme::ImexEM, 1e-4, 0.2, 100};
  std::optional<double> L_min, L_max, f_max;
  bool check_turning = true;

  std::uint64_t seed = 1;
  std::string output_path = "trajectory.jsonl";
  int max_stored_values = 256;

  int ensemble_size = 100;
  bool paired = false;
  std::string trajectory_dir;

  ConvergenceKind convergence = ConvergenceKind::Time;
  std::vector<double> levels;  ///< dt values (time, strong) or grid sizes (space)
  int paths = 200;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` pair; throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// Writes every key with its value in `cfg`, one per line, preceded by a comment.
void print_config(std::ostream& out, const RunConfig& cfg = {});

std::shared_ptr<const Grid> make_grid(const RunConfig& cfg);
NoiseModel make_noise(const RunConfig& cfg);
FlowOperator make_operator(const RunConfig& cfg);
State make_initial_state(const RunConfig& cfg, const Grid& grid);
StopCriteria make_stop(const RunConfig& cfg, const State& initial);

// ---------------------------------------------------------------- records

struct SnapshotRecord {
  double t = 0.0;
  double L = 0.0;
  int n = 0;
  int stride = 1;
  std::vector<double> f;
  double turning = 0.0;
  double energy = 0.0;
  std::optional<double> area;
  std::optional<double> closure_defect;
  std::string topology;
  std::string status;  ///< "running" or the terminal status on the final record
  bool final = false;
};

SnapshotRecord make_record(const Snapshot& snap, Topology topology, int max_stored_values,
                           bool final, const std::string& status);
std::string to_json_line(const SnapshotRecord& rec);
SnapshotRecord parse_record(const std::string& line);
std::vector<SnapshotRecord> read_records(const std::filesystem::path& path);

/// Final full-resolution state of a trajectory file.
State read_final_state(const std::filesystem::path& path, Topology* topology = nullptr);

// ---------------------------------------------------------------- commands

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitBlowUp = 4,
};

int exit_code(TerminalStatus status);

struct SimulationResult {
  Trajectory trajectory;
  std::vector<SnapshotRecord> records;
};

/// One trajectory; records are written as JSON lines to `out` when non-empty.
SimulationResult simulate(const RunConfig& cfg, const std::filesystem::path& out);

struct TimeSeriesRow {
  double t = 0.0;
  int count = 0;
  double mean_L = 0.0;
  double var_L = 0.0;
  double stderr_L = 0.0;
  double mean_energy = 0.0;
};

struct SchemeSummary {
  std::string scheme;
  int size = 0;
  int reached = 0;
  double blowup_fraction = 0.0;
  double mean_L_final = 0.0;
  double var_L_final = 0.0;
  double stderr_L_final = 0.0;
  double mean_energy_final = 0.0;
  std::vector<TimeSeriesRow> series;
};

struct PairedSummary {
  double mean_gap = 0.0;         ///< E[L_imex(T)] - E[L_heun(T)]
  double pooled_stderr = 0.0;    ///< sqrt(se_imex^2 + se_heun^2)
  double mean_abs_gap = 0.0;     ///< mean over paths of |L_imex(T) - L_heun(T)|
  double tolerance = 0.0;        ///< 3 (pooled_stderr + 5 dt)
  bool consistent = false;
};

struct EnsembleSummary {
  std::uint64_t seed = 0;
  int size = 0;
  double dt = 0.0;
  double t_end = 0.0;
  SchemeSummary primary;
  std::optional<SchemeSummary> heun;
  std::optional<PairedSummary> paired;
};

/// Per-trajectory reduction used for aggregation.
struct TrajectoryDigest {
  std::uint64_t index = 0;
  TerminalStatus status = TerminalStatus::ReachedT;
  std::vector<double> t, L, energy;
};

TrajectoryDigest digest(std::uint64_t index, TerminalStatus status,
                        const std::vector<SnapshotRecord>& records);
SchemeSummary aggregate(const std::string& scheme, const std::vector<TrajectoryDigest>& runs);
/// Re-aggregates the per-trajectory files written by an ensemble.
SchemeSummary aggregate_files(const std::string& scheme, const std::filesystem::path& dir,
                              int size);

/// Runs cfg.ensemble_size trajectories on `workers` threads.  With cfg.paired
/// every path is also run with the Heun scheme on the same increments.
EnsembleSummary run_ensemble(const RunConfig& cfg, int workers);
std::string to_json(const EnsembleSummary& summary);
std::string to_csv(const EnsembleSummary& summary);

struct ConvergenceReport {
  ConvergenceKind kind = ConvergenceKind::Time;
  std::vector<double> levels;
  std::vector<double> errors;
  double order = 0.0;  ///< least-squares slope of log error against log level
  /// error(coarser) / error(finer) for consecutive levels, coarsest first
  std::vector<double> ratios;
  std::string reference;
};

/// Time: error against the exact circle law when it applies, otherwise a run at
/// a quarter of the finest dt.  Space: runs at each n compared on shared nodes
/// with a run at twice the finest n, starting from a smooth manufactured state.
/// Strong: mean over coupled paths of |L_dt - L_ref| + max |f_dt - f_ref| at T.
ConvergenceReport run_convergence(const RunConfig& cfg, int workers = 1);
std::string to_json(const ConvergenceReport& report);

struct InvariantResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

std::vector<InvariantResult> run_invariants(const RunConfig& cfg);
std::string to_json(const std::vector<InvariantResult>& results);

/// Exact circle law for deterministic Willmore: L(t) = L0 (1 + 2 t / R0^4)^(1/4).
double circle_law_length(double L0, int winding, double t);

}  // namespace curveflow
