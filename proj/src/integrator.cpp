#include "curveflow/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "curveflow/error.hpp"
#include "curveflow/geometry.hpp"

namespace curveflow {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::ImexEM: return "imex_em";
    case Scheme::HeunStratonovich: return "heun_strat";
    case Scheme::ExplicitEM: return "explicit_em";
  }
  return "?";
}

const char* to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::ReachedT: return "ReachedT";
    case TerminalStatus::BlowUpCurvature: return "BlowUpCurvature";
    case TerminalStatus::BlowUpLengthZero: return "BlowUpLengthZero";
    case TerminalStatus::BlowUpLengthInfinite: return "BlowUpLengthInfinite";
    case TerminalStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

void StepperConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("stepper.dt", "must be finite and > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw ConfigError("stepper.t_end", "must be finite and > 0");
  }
  if (snapshot_every < 1) throw ConfigError("stepper.snapshot_every", "must be >= 1");
}

StopCriteria StopCriteria::defaults_for(const State& initial, double t_end) {
  const double fmax = initial.f.size() ? initial.f.abs().maxCoeff() : 0.0;
  return StopCriteria{1e-3 * initial.L, 1e3 * initial.L, 1e3 * std::max(1.0, fmax), t_end};
}

void StopCriteria::validate() const {
  if (!(L_min > 0.0)) throw ConfigError("stop.L_min", "must be > 0");
  if (!(L_max > L_min)) throw ConfigError("stop.L_max", "must exceed stop.L_min");
  if (!(f_max > 0.0)) throw ConfigError("stop.f_max", "must be > 0");
}

namespace {

bool finite(const State& s) { return std::isfinite(s.L) && s.f.allFinite(); }

StepResult classify(State next) {
  StepResult out{std::move(next), StepStatus::Ok};
  if (!finite(out.state)) {
    out.status = StepStatus::NonFinite;
  } else if (!(out.state.L > 0.0)) {
    out.status = StepStatus::NegativeLength;
  }
  return out;
}

void add_noise(Field& f, double& L, const std::vector<DiffusionRow>& rows,
               std::span<const double> dW, double weight = 1.0) {
  for (std::size_t l = 0; l < rows.size() && l < dW.size(); ++l) {
    f += (weight * dW[l]) * rows[l].b_f;
    L += weight * dW[l] * rows[l].b_L;
  }
}

bool noisy(const FlowOperator& op, std::span<const double> dW) {
  if (!op.spec().noise.active()) return false;
  if (static_cast<int>(dW.size()) != op.spec().noise.n_modes()) {
    throw DomainError("step: expected one Brownian increment per noise mode");
  }
  return true;
}

}  // namespace

StepResult step_imex_em(const FlowOperator& op, const State& s, double dt,
                        std::span<const double> dW) {
  const bool with_noise = noisy(op, dW);
  const FlowTerms t = op.evaluate(s, with_noise);
  const double L = s.L;

  Field rhs = s.f + dt * (t.deterministic_f + t.correction_f);
  double L_rhs = L;
  if (with_noise) add_noise(rhs, L_rhs, t.rows, dW);

  // Drift of L is linear in L to leading order; treating that factor
  // implicitly keeps L positive under strong shrinking.
  const double rate = (t.deterministic_L + t.correction_L) / L;
  const double denom = 1.0 - dt * rate;
  if (!(denom > 0.0)) return {s, StepStatus::NegativeLength};

  State next;
  next.f = op.grid().solve_shifted_biharmonic(rhs, op.spec().stiff_sign() * dt / (L * L * L * L));
  next.L = L_rhs / denom;
  next.t = s.t + dt;
  return classify(std::move(next));
}

StepResult step_heun_strat(const FlowOperator& op, const State& s, double dt,
                           std::span<const double> dW) {
  const bool with_noise = noisy(op, dW);
  const double c = op.spec().stiff_sign() * dt / std::pow(s.L, 4);
  const Grid& g = op.grid();

  const FlowTerms t0 = op.evaluate(s, with_noise);
  Field rhs = s.f + dt * t0.deterministic_f;
  State pred;
  pred.L = s.L + dt * t0.deterministic_L;
  if (with_noise) add_noise(rhs, pred.L, t0.rows, dW);
  pred.f = g.solve_shifted_biharmonic(rhs, c);
  pred.t = s.t + dt;
  if (!finite(pred)) return {pred, StepStatus::NonFinite};
  if (!(pred.L > 0.0)) return {s, StepStatus::NegativeLength};

  const FlowTerms t1 = op.evaluate(pred, with_noise);
  rhs = s.f + (0.5 * dt) * (t0.deterministic_f + t1.deterministic_f);
  State next;
  next.L = s.L + 0.5 * dt * (t0.deterministic_L + t1.deterministic_L);
  if (with_noise) {
    add_noise(rhs, next.L, t0.rows, dW, 0.5);
    add_noise(rhs, next.L, t1.rows, dW, 0.5);
  }
  next.f = g.solve_shifted_biharmonic(rhs, c);
  next.t = s.t + dt;
  return classify(std::move(next));
}

StepResult step_explicit_em(const FlowOperator& op, const State& s, double dt,
                            std::span<const double> dW) {
  const bool with_noise = noisy(op, dW);
  const FlowTerms t = op.evaluate(s, with_noise);
  State next;
  next.f = s.f + dt * (t.stiff + t.deterministic_f + t.correction_f);
  next.L = s.L + dt * (t.deterministic_L + t.correction_L);
  if (with_noise) add_noise(next.f, next.L, t.rows, dW);
  next.t = s.t + dt;
  return classify(std::move(next));
}

StepResult step(Scheme scheme, const FlowOperator& op, const State& s, double dt,
                std::span<const double> dW) {
  switch (scheme) {
    case Scheme::ImexEM: return step_imex_em(op, s, dt, dW);
    case Scheme::HeunStratonovich: return step_heun_strat(op, s, dt, dW);
    case Scheme::ExplicitEM: return step_explicit_em(op, s, dt, dW);
  }
  throw DomainError("unknown scheme");
}

double stability_limit(Scheme scheme, const FlowOperator& op, const State& s) {
  const double n = op.grid().n();
  if (scheme == Scheme::ExplicitEM) {
    const double L2n2 = s.L * s.L / (n * n);
    return 2.0 / std::pow(std::numbers::pi, 4) * L2n2 * L2n2;
  }
  const double fmax = s.f.abs().maxCoeff();
  if (fmax == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * s.L * s.L / (fmax * fmax * n * n);
}

namespace {

constexpr int kMaxHalvings = 10;
constexpr int kMaxSplitDepth = 40;
constexpr double kMaxSubsteps = 1 << 16;

StepResult advance_impl(Scheme scheme, const FlowOperator& op, const State& s, double dt,
                        std::span<const double> dW, BrownianDriver& bridge, int halvings,
                        int depth) {
  if (depth > kMaxSplitDepth) return {s, StepStatus::NonFinite};
  const bool with_noise = op.spec().noise.active();
  auto split = [&](int pieces, int next_halvings) -> StepResult {
    std::vector<std::vector<double>> parts;
    if (with_noise) parts = bridge_split(dW, dt, pieces, bridge);
    State cur = s;
    const double h = dt / pieces;
    for (int i = 0; i < pieces; ++i) {
      std::span<const double> piece = with_noise ? std::span<const double>(parts[i]) : dW;
      StepResult r = advance_impl(scheme, op, cur, h, piece, bridge, next_halvings, depth + 1);
      if (r.status != StepStatus::Ok) return r;
      cur = std::move(r.state);
    }
    cur.t = s.t + dt;
    return {std::move(cur), StepStatus::Ok};
  };

  if (scheme != Scheme::ExplicitEM) {
    const double limit = stability_limit(scheme, op, s);
    if (dt > limit) {
      const double k = std::ceil(dt / limit);
      if (!(k <= kMaxSubsteps)) return {s, StepStatus::NonFinite};
      return split(static_cast<int>(k), halvings);
    }
  }

  StepResult r = step(scheme, op, s, dt, dW);
  if (r.status == StepStatus::NegativeLength && halvings < kMaxHalvings) {
    return split(2, halvings + 1);
  }
  return r;
}

}  // namespace

StepResult advance(Scheme scheme, const FlowOperator& op, const State& s, double dt,
                   std::span<const double> dW, BrownianDriver& bridge) {
  return advance_impl(scheme, op, s, dt, dW, bridge, 0, 0);
}

Diagnostics diagnose(const FlowOperator& op, const State& s, bool geometry) {
  const Functionals fn = functionals(op.grid(), s);
  Diagnostics d;
  d.turning = fn.total_turning;
  d.energy = fn.bending_energy;
  d.length = fn.length;
  if (geometry && op.grid().topology() == Topology::Closed) {
    const CurveSample curve = reconstruct(op.grid(), s);
    d.area = enclosed_area(curve).area;
    d.closure_defect = closure_defect(curve);
  }
  return d;
}

Trajectory run(const FlowOperator& op, State state0, const StepperConfig& cfg,
               const StopCriteria& stop, const RunOptions& options) {
  cfg.validate();
  stop.validate();
  op.check_state(state0);
  if (options.check_turning && op.grid().topology() == Topology::Closed) {
    const double turning = state0.L * op.grid().integrate(state0.f);
    const double target = 2.0 * std::numbers::pi * op.spec().winding;
    if (std::abs(turning - target) > 1e-6) {
      throw DomainError("initial state: total turning " + std::to_string(turning) +
                        " differs from 2 pi * winding");
    }
  }

  const bool with_noise = op.spec().noise.active();
  const int modes = op.spec().noise.n_modes();
  BrownianDriver driver(options.seed, options.trajectory_index, 0);
  BrownianDriver bridge(options.seed, options.trajectory_index, 1);

  Trajectory traj;
  auto record = [&](const State& s) {
    Snapshot snap{s, diagnose(op, s, options.geometry)};
    if (!options.keep_fields) snap.state.f = Field();
    if (options.observer) options.observer(snap);
    traj.snapshots.push_back(std::move(snap));
  };

  const double t_end = std::min(cfg.t_end, stop.t_end > 0.0 ? stop.t_end : cfg.t_end);
  const auto n_steps = static_cast<std::uint64_t>(std::ceil(t_end / cfg.dt - 1e-9));
  const double t0 = state0.t;
  State s = std::move(state0);
  record(s);

  for (std::uint64_t i = 0; i < n_steps; ++i) {
    const double t_next = std::min(t0 + static_cast<double>(i + 1) * cfg.dt, t0 + t_end);
    const double h = t_next - s.t;
    std::vector<double> dW;
    if (with_noise) dW = driver.increments(modes, h);

    StepResult r = advance(cfg.scheme, op, s, h, dW, bridge);
    ++traj.steps;
    if (r.status == StepStatus::NonFinite) {
      traj.status = TerminalStatus::NumericalFailure;
      traj.detail = "non-finite value at t = " + std::to_string(t_next);
      if (traj.snapshots.back().state.t != s.t) record(s);
      return traj;
    }
    if (r.status == StepStatus::NegativeLength) {
      traj.status = TerminalStatus::BlowUpLengthZero;
      traj.detail = "length driven non-positive after repeated step halving";
      if (traj.snapshots.back().state.t != s.t) record(s);
      return traj;
    }
    s = std::move(r.state);
    s.t = t_next;

    std::optional<TerminalStatus> blowup;
    if (s.f.abs().maxCoeff() > stop.f_max) {
      blowup = TerminalStatus::BlowUpCurvature;
    } else if (s.L < stop.L_min) {
      blowup = TerminalStatus::BlowUpLengthZero;
    } else if (s.L > stop.L_max) {
      blowup = TerminalStatus::BlowUpLengthInfinite;
    }
    const bool last = i + 1 == n_steps;
    if (blowup || last || (i + 1) % static_cast<std::uint64_t>(cfg.snapshot_every) == 0) {
      record(s);
    }
    if (blowup) {
      traj.status = *blowup;
      return traj;
    }
  }
  traj.status = TerminalStatus::ReachedT;
  return traj;
}

}  // namespace curveflow
