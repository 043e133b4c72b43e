#include "curveflow/flows.hpp"

#include <cmath>
#include <numbers>

#include "curveflow/error.hpp"

namespace curveflow {

const char* to_string(FlowKind kind) {
  return kind == FlowKind::Willmore ? "willmore" : "curve_diffusion";
}

const char* to_string(Transport transport) {
  return transport == Transport::Arclength ? "arclength" : "dilation";
}

FlowOperator::FlowOperator(std::shared_ptr<const Grid> grid, FlowSpec spec)
    : grid_(std::move(grid)), spec_(std::move(spec)) {
  if (!grid_) throw DomainError("FlowOperator: null grid");
  if (grid_->topology() != spec_.topology) {
    throw DomainError("FlowOperator: flow topology does not match grid topology");
  }
  if (spec_.winding == 0 && spec_.uses_turning_identity()) {
    throw DomainError("FlowOperator: closed scalar noise needs a nonzero winding number");
  }
  const double a = spec_.noise.amplitude();
  for (int l = 1; l <= spec_.noise.n_modes(); ++l) {
    Profile p;
    p.v = a * spec_.noise.basis_eval(l, 0, *grid_);
    p.v1 = a * spec_.noise.basis_eval(l, 1, *grid_);
    p.v2 = a * spec_.noise.basis_eval(l, 2, *grid_);
    p.v3 = a * spec_.noise.basis_eval(l, 3, *grid_);
    p.constant = spec_.noise.basis()[l - 1].shape == BasisFunction::Shape::Constant;
    profiles_.push_back(std::move(p));
  }
}

void FlowOperator::check_state(const State& state) const {
  if (!(state.L > 0.0) || !std::isfinite(state.L)) {
    throw DomainError("state: L must be finite and positive");
  }
  grid_->check_field(state.f, "state");
}

FlowTerms FlowOperator::evaluate(const State& state, bool with_noise) const {
  check_state(state);
  const Grid& g = *grid_;
  const Field& r = g.nodes();
  const double L = state.L;
  const double L2 = L * L;
  const bool arclength = spec_.transport == Transport::Arclength;
  auto mul = [&g](const Field& a, const Field& b) { return g.product(a, b); };
  // Phi[V] for a given f*V and its integral.
  auto transport = [&](const Field& fv, double lambda) -> Field {
    if (arclength) return g.cumulative_integral(fv) - r * lambda;
    return -r * lambda;
  };

  const auto d = g.derivs(state.f, 4);
  const Field& f = d[0];
  const Field& fr = d[1];
  const Field& frr = d[2];
  const Field f2 = mul(f, f);

  FlowTerms out;
  out.stiff = -spec_.stiff_sign() / (L2 * L2) * d[4];

  // Deterministic normal speed and the non-stiff part of G[V].
  Field speed = -frr / L2;
  Field rest = mul(f2, speed);
  if (spec_.kind == FlowKind::Willmore) {
    const Field f3 = mul(f2, f);
    speed -= 0.5 * f3;
    rest -= 0.5 * mul(f3, f2);
    // (1/L^2) d_rr(-f^3/2) by the product rule
    rest -= (1.5 / L2) * mul(f2, frr) + (3.0 / L2) * mul(f, mul(fr, fr));
  }
  const Field fv = mul(f, speed);
  const double lambda = g.integrate(fv);
  rest += mul(fr, transport(fv, lambda));
  out.deterministic_f = std::move(rest);
  out.deterministic_L = -L * lambda;

  out.correction_f = Field::Zero(g.n());
  out.correction_L = 0.0;
  if (!with_noise) return out;

  const double turning = 2.0 * std::numbers::pi * spec_.winding;
  const bool identity = spec_.uses_turning_identity();
  out.rows.reserve(profiles_.size());
  for (const Profile& p : profiles_) {
    // With the turning identity int_0^1 f dr = turning / L for a constant profile.
    const double a = p.constant ? p.v[0] : 0.0;
    const Field fvl = mul(f, p.v);
    const double lam = identity ? a * turning / L : g.integrate(fvl);
    const Field phi = transport(fvl, lam);

    DiffusionRow row;
    row.b_f = p.v2 / L2 + mul(f2, p.v) + mul(fr, phi);
    row.b_L = identity ? -a * turning : -L * lam;

    // Directional derivative of (b_f, b_L) along (b_f, b_L) itself.
    const Field& gf = row.b_f;
    const double m = row.b_L;
    const Field phi_r = arclength ? Field(fvl - lam) : Field(Field::Constant(g.n(), -lam));
    const Field gr = p.v3 / L2 + 2.0 * mul(mul(f, fr), p.v) + mul(f2, p.v1) + mul(frr, phi) +
                     mul(fr, phi_r);
    const Field gv = mul(gf, p.v);
    const double dlam = identity ? -a * turning * m / L2 : g.integrate(gv);
    const Field dphi = arclength ? Field(g.cumulative_integral(gv) - r * dlam) : Field(-r * dlam);
    const Field dbf = (-2.0 * m / (L2 * L)) * p.v2 + 2.0 * mul(f, gv) + mul(gr, phi) +
                      mul(fr, dphi);
    const double dbl = -m * lam - L * dlam;
    out.correction_f += 0.5 * dbf;
    out.correction_L += 0.5 * dbl;
    out.rows.push_back(std::move(row));
  }
  return out;
}

DriftSplit FlowOperator::assemble_drift(const State& state) const {
  FlowTerms t = evaluate(state, spec_.noise.active());
  return DriftSplit{std::move(t.stiff), t.deterministic_f + t.correction_f,
                    t.deterministic_L + t.correction_L};
}

std::vector<DiffusionRow> FlowOperator::assemble_diffusion(const State& state) const {
  return evaluate(state, true).rows;
}

ItoCorrection FlowOperator::ito_correction(const State& state) const {
  FlowTerms t = evaluate(state, spec_.noise.active());
  return ItoCorrection{std::move(t.correction_f), t.correction_L};
}

}  // namespace curveflow
