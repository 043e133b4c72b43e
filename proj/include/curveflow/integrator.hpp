#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curveflow/flows.hpp"
#include "curveflow/noise.hpp"

namespace curveflow {

enum class Scheme { ImexEM, HeunStratonovich, ExplicitEM };

const char* to_string(Scheme scheme);

struct StepperConfig {
  Scheme scheme = Scheme::ImexEM;
  double dt = 1e-4;
  double t_end = 0.5;
  int snapshot_every = 100;

  void validate() const;
};

/// Numerical surrogate for the blow-up alternative.
struct StopCriteria {
  double L_min = 0.0;
  double L_max = 0.0;
  double f_max = 0.0;
  double t_end = 0.0;

  /// L_min = 1e-3 L0, L_max = 1e3 L0, f_max = 1e3 max(1, |f0|_inf).
  static StopCriteria defaults_for(const State& initial, double t_end);
  void validate() const;
};

enum class TerminalStatus {
  ReachedT,
  BlowUpCurvature,
  BlowUpLengthZero,
  BlowUpLengthInfinite,
  NumericalFailure,
};

const char* to_string(TerminalStatus status);

struct Diagnostics {
  double turning = 0.0;
  double energy = 0.0;
  double length = 0.0;
  /// Only for closed curves.
  std::optional<double> area;
  std::optional<double> closure_defect;
};

struct Snapshot {
  State state;
  Diagnostics diagnostics;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  TerminalStatus status = TerminalStatus::ReachedT;
  std::uint64_t steps = 0;
  /// Free-form reason for a failure that left no valid terminal state.
  std::string detail;
};

enum class StepStatus { Ok, NegativeLength, NonFinite };

struct StepResult {
  State state;
  StepStatus status = StepStatus::Ok;
};

// Single steps over [t, t+dt] with given increments dW (one per noise mode,
// empty when the noise is inactive).  No stability handling.
StepResult step_imex_em(const FlowOperator& op, const State& s, double dt,
                        std::span<const double> dW);
StepResult step_heun_strat(const FlowOperator& op, const State& s, double dt,
                           std::span<const double> dW);
StepResult step_explicit_em(const FlowOperator& op, const State& s, double dt,
                            std::span<const double> dW);
StepResult step(Scheme scheme, const FlowOperator& op, const State& s, double dt,
                std::span<const double> dW);

/// Largest dt the scheme tolerates at this state.
///   ImexEM, Heun: 0.5 L^2 / (|f|_inf^2 n^2), from the explicit second-order terms.
///   ExplicitEM: 2 L^4 / (pi^4 n^4), the explicit biharmonic limit.
double stability_limit(Scheme scheme, const FlowOperator& op, const State& s);

/// One macro step with the stability and rejection machinery: steps above the
/// IMEX/Heun limit are split into equal substeps, and a step that drives L
/// negative is halved (up to 10 times).  Sub-increments come from Brownian
/// bridges drawn from `bridge`, so the total increment over dt is unchanged.
StepResult advance(Scheme scheme, const FlowOperator& op, const State& s, double dt,
                   std::span<const double> dW, BrownianDriver& bridge);

struct RunOptions {
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;
  /// Reject closed initial states whose turning is not 2 pi winding (1e-6).
  bool check_turning = true;
  /// Reconstruct closed curves for area and closure diagnostics.
  bool geometry = true;
  /// Keep f in stored snapshots; off keeps only L, t and diagnostics.
  bool keep_fields = true;
  /// Called for every snapshot as it is produced.
  std::function<void(const Snapshot&)> observer;
};

Diagnostics diagnose(const FlowOperator& op, const State& s, bool geometry);

/// Steps from state0 to cfg.t_end or until a stop criterion trips.  Noise
/// increments come from BrownianDriver(seed, index, 0), bridge refinements
/// from stream 1.  Snapshots are taken at t = 0, every `snapshot_every` steps
/// and at the terminal state.
Trajectory run(const FlowOperator& op, State state0, const StepperConfig& cfg,
               const StopCriteria& stop, const RunOptions& options = {});

}  // namespace curveflow
