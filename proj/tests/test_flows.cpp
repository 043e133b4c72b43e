#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "curveflow/error.hpp"
#include "curveflow/flows.hpp"
#include "curveflow/geometry.hpp"
#include "oracles.hpp"

using namespace curveflow;
using std::numbers::pi;

namespace {

FlowOperator make(FlowKind kind, Topology topo, NoiseModel noise, int n = 64,
                  Transport transport = Transport::Arclength) {
  FlowSpec spec;
  spec.kind = kind;
  spec.topology = topo;
  spec.transport = transport;
  spec.noise = std::move(noise);
  return FlowOperator(std::make_shared<const Grid>(topo, n), spec);
}

double max_abs(const Field& a) { return a.abs().maxCoeff(); }

State random_closed_state(std::mt19937_64& rng, const Grid& g, double L) {
  const auto s = oracle::TrigState::random(rng, 2 * pi / L, 5, 0.2 / L);
  return State{s.sample(g.nodes(), 0), L, 0.0};
}

}  // namespace

// ------------------------------------------------------------- spec values

TEST(Flows, WillmoreCircleScalarDrift) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::scalar(1.0));
  for (double c : {0.5, 1.0, 1.7}) {
    const State s{Field::Constant(64, c), 2 * pi / c, 0.0};
    const DriftSplit d = op.assemble_drift(s);
    EXPECT_LT(max_abs(d.explicit_f - (-0.5 * std::pow(c, 5) + std::pow(c, 3))), 1e-12);
    EXPECT_NEAR(d.explicit_L, 0.5 * s.L * std::pow(c, 4), 1e-12);
    EXPECT_LT(max_abs(d.stiff), 1e-12);
    EXPECT_NEAR(op.ito_correction(s).L, 0.0, 1e-12);
  }
}

TEST(Flows, CurveDiffusionCircleCorrection) {
  const auto op = make(FlowKind::CurveDiffusion, Topology::Closed, NoiseModel::scalar(1.0));
  const double c = 1.3;
  const State s{Field::Constant(64, c), 2 * pi / c, 0.0};
  EXPECT_LT(max_abs(op.ito_correction(s).f - c * c * c), 1e-12);
  EXPECT_NEAR(op.assemble_drift(s).explicit_L, 0.0, 1e-12);
}

TEST(Flows, SpectralNoiseOnFlatState) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::spectral(4, 1.0, 1.0));
  const Grid& g = op.grid();
  const State s{Field::Zero(64), 1.0, 0.0};
  const auto rows = op.assemble_diffusion(s);
  double expected_L = 0.0;
  for (int l = 1; l <= 4; ++l) {
    const Field phi = op.spec().noise.basis_eval(l, 0, g);
    const Field phi2 = op.spec().noise.basis_eval(l, 2, g);
    EXPECT_LT(max_abs(rows[l - 1].b_f - phi2), 1e-9);
    EXPECT_EQ(rows[l - 1].b_L, 0.0);
    expected_L += -0.5 * g.integrate(phi * phi2);
  }
  EXPECT_NEAR(op.ito_correction(s).L, expected_L, 1e-9);
}

TEST(Flows, InactiveNoiseHasNoCorrection) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::scalar(0.0));
  std::mt19937_64 rng(1);
  const State s = random_closed_state(rng, op.grid(), 5.0);
  const ItoCorrection c = op.ito_correction(s);
  EXPECT_EQ(max_abs(c.f), 0.0);
  EXPECT_EQ(c.L, 0.0);
}

TEST(Flows, RejectsInvalidState) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::scalar(0.0));
  EXPECT_THROW(op.assemble_drift(State{Field::Ones(64), -1.0, 0.0}), DomainError);
  EXPECT_THROW(op.assemble_drift(State{Field::Ones(63), 1.0, 0.0}), DomainError);
  EXPECT_THROW(FlowOperator(std::make_shared<const Grid>(Topology::Open, 64),
                            FlowSpec{FlowKind::Willmore, Topology::Closed}),
               DomainError);
}

// --------------------------------------------- 2 pi diffusion coefficient

TEST(Flows, ClosedScalarLengthCoefficientIsMinusTwoPi) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::scalar(1.0));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> Ls(0.5, 20.0);
  for (int i = 0; i < 100; ++i) {
    const State s = random_closed_state(rng, op.grid(), Ls(rng));
    EXPECT_EQ(op.assemble_diffusion(s).front().b_L, -2 * pi);
  }
}

// ------------------------------------------- reference systems, dilation form

TEST(Flows, WillmoreClosedScalarMatchesExplicitSystem) {
  const auto op = make(FlowKind::Willmore, Topology::Closed, NoiseModel::scalar(1.0), 64,
                       Transport::Dilation);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const double L = 2.0 + 4.0 * trial / 20.0;
    const auto ts = oracle::TrigState::random(rng, 2 * pi / L, 4, 0.3 / L);
    const State s{ts.sample(op.grid().nodes(), 0), L, 0.0};
    const auto ref = oracle::willmore_closed_scalar(ts, L, op.grid().nodes());
    const FlowTerms t = op.evaluate(s, true);
    const Field drift = t.stiff + t.deterministic_f + t.correction_f;
    const double scale = 1.0 + max_abs(ref.drift_f);
    EXPECT_LT(max_abs(drift - ref.drift_f), 1e-9 * scale);
    EXPECT_NEAR(t.deterministic_L + t.correction_L, ref.drift_L, 1e-9 * (1 + std::abs(ref.drift_L)));
    EXPECT_LT(max_abs(t.rows[0].b_f - ref.noise_f), 1e-10 * (1 + max_abs(ref.noise_f)));
    EXPECT_DOUBLE_EQ(t.rows[0].b_L, ref.noise_L);
  }
}

TEST(Flows, CurveDiffusionClosedScalarMatchesExplicitSystem) {
  const auto op = make(FlowKind::CurveDiffusion, Topology::Closed, NoiseModel::scalar(1.0), 64,
                       Transport::Dilation);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const double L = 3.0 + trial * 0.2;
    const auto ts = oracle::TrigState::random(rng, 2 * pi / L, 4, 0.3 / L);
    const State s{ts.sample(op.grid().nodes(), 0), L, 0.0};
    const auto ref = oracle::curve_diffusion_closed_scalar(ts, L, op.grid().nodes());
    const FlowTerms t = op.evaluate(s, true);
    const Field drift = t.stiff + t.deterministic_f + t.correction_f;
    EXPECT_LT(max_abs(drift - ref.drift_f), 1e-9 * (1 + max_abs(ref.drift_f)));
    EXPECT_NEAR(t.deterministic_L + t.correction_L, ref.drift_L, 1e-9);
    EXPECT_LT(max_abs(t.rows[0].b_f - ref.noise_f), 1e-10 * (1 + max_abs(ref.noise_f)));
  }
}

TEST(Flows, WillmoreOpenScalarMatchesExplicitSystem) {
  // The one-sided fourth-derivative stencils lose accuracy to round-off like
  // eps / h^4, so the stiff term is compared separately at a looser tolerance.
  const auto op = make(FlowKind::Willmore, Topology::Open, NoiseModel::scalar(1.0), 101,
                       Transport::Dilation);
  auto fn = [](double x, int o) {
    const double s = std::pow(2.0, o) * std::sin(2 * x + 0.4 + o * pi / 2);
    const double e = (o % 2 ? -1.0 : 1.0) * std::exp(-x);
    return (o == 0 ? 0.8 : 0.0) + 0.3 * s + 0.2 * e;
  };
  const Field& r = op.grid().nodes();
  Field f(r.size()), f4(r.size());
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    f[j] = fn(r[j], 0);
    f4[j] = fn(r[j], 4);
  }
  for (double L : {0.7, 1.5, 4.0}) {
    const auto ref = oracle::willmore_open_scalar(fn, L, r);
    const FlowTerms t = op.evaluate(State{f, L, 0.0}, true);
    const Field exact_stiff = -f4 / std::pow(L, 4);
    EXPECT_LT(max_abs(t.stiff - exact_stiff), 1e-5 * (1 + max_abs(exact_stiff))) << "L=" << L;
    const Field rest = ref.drift_f - exact_stiff;
    EXPECT_LT(max_abs(t.deterministic_f + t.correction_f - rest), 1e-6 * (1 + max_abs(rest)))
        << "L=" << L;
    EXPECT_NEAR(t.deterministic_L + t.correction_L, ref.drift_L, 1e-7 * (1 + std::abs(ref.drift_L)));
    EXPECT_LT(max_abs(t.rows[0].b_f - ref.noise_f), 1e-7 * (1 + max_abs(ref.noise_f)));
    EXPECT_NEAR(t.rows[0].b_L, ref.noise_L, 1e-8);
  }
}

// --------------------------------------- Ito correction as a derivative

namespace {

void check_correction_by_finite_differences(const FlowOperator& op, const State& s) {
  const FlowTerms base = op.evaluate(s, true);
  const double eps = 1e-6;
  Field fd_f = Field::Zero(s.f.size());
  double fd_L = 0.0;
  for (std::size_t l = 0; l < base.rows.size(); ++l) {
    const DiffusionRow& b = base.rows[l];
    const State plus{s.f + eps * b.b_f, s.L + eps * b.b_L, 0.0};
    const State minus{s.f - eps * b.b_f, s.L - eps * b.b_L, 0.0};
    const auto rp = op.evaluate(plus, true).rows[l];
    const auto rm = op.evaluate(minus, true).rows[l];
    fd_f += 0.5 * (rp.b_f - rm.b_f) / (2 * eps);
    fd_L += 0.5 * (rp.b_L - rm.b_L) / (2 * eps);
  }
  const double scale = 1.0 + max_abs(base.correction_f);
  EXPECT_LT(max_abs(base.correction_f - fd_f), 1e-6 * scale);
  EXPECT_NEAR(base.correction_L, fd_L, 1e-6 * (1 + std::abs(fd_L)));
}

}  // namespace

TEST(Flows, ItoCorrectionIsHalfDirectionalDerivative) {
  std::mt19937_64 rng(31);
  // Closed curves only under arclength transport: the dilation rows contain
  // r f_r, which is not periodic, so their spectral derivative is meaningless.
  for (auto kind : {FlowKind::Willmore, FlowKind::CurveDiffusion}) {
    for (auto noise : {NoiseModel::scalar(0.7), NoiseModel::spectral(6, 0.5, 2.0)}) {
      const auto op = make(kind, Topology::Closed, noise, 64);
      SCOPED_TRACE(to_string(kind));
      check_correction_by_finite_differences(op, random_closed_state(rng, op.grid(), 4.0));
    }
  }
  auto fn_state = [](const Grid& g) {
    return State{0.5 + 0.3 * (1.7 * g.nodes()).sin(), 2.0, 0.0};
  };
  for (auto noise : {NoiseModel::scalar(0.7), NoiseModel::spectral(4, 0.5, 2.0)}) {
    const auto op = make(FlowKind::Willmore, Topology::Open, noise, 257);
    check_correction_by_finite_differences(op, fn_state(op.grid()));
  }
}

// ----------------------------------------------- split vs unsplit assembly

TEST(Flows, SplitDriftMatchesUnsplitOperator) {
  std::mt19937_64 rng(41);
  for (auto kind : {FlowKind::Willmore, FlowKind::CurveDiffusion}) {
    for (auto transport : {Transport::Arclength, Transport::Dilation}) {
      const auto op = make(kind, Topology::Closed, NoiseModel::scalar(0.0), 128, transport);
      const Grid& g = op.grid();
      const State s = random_closed_state(rng, g, 5.0);
      const double L2 = s.L * s.L;
      const Field f = s.f, fr = g.deriv(f, 1);
      Field V = -g.deriv(f, 2) / L2;
      if (kind == FlowKind::Willmore) V -= 0.5 * f.cube();
      const double lambda = g.integrate(f * V);
      Field phi = -g.nodes() * lambda;
      if (transport == Transport::Arclength) phi += g.cumulative_integral(f * V);
      const Field unsplit = g.deriv(V, 2) / L2 + f.square() * V + fr * phi;
      const FlowTerms t = op.evaluate(s, false);
      EXPECT_LT(max_abs(t.stiff + t.deterministic_f - unsplit), 1e-9 * (1 + max_abs(unsplit)));
      EXPECT_NEAR(t.deterministic_L, -s.L * lambda, 1e-12);
    }
  }
}

// ------------------------------------- spectral noise with phi_1 == 1 only

TEST(Flows, OpenSpectralNoiseDegeneratesToScalar) {
  using Shape = BasisFunction::Shape;
  const NoiseModel degenerate = NoiseModel::custom(
      {{Shape::Constant, 0, 1.0}, {Shape::Cosine, 1, 0.0}, {Shape::Sine, 1, 0.0}}, 0.8);
  const auto spectral = make(FlowKind::Willmore, Topology::Open, degenerate, 65);
  const auto scalar = make(FlowKind::Willmore, Topology::Open, NoiseModel::scalar(0.8), 65);
  std::mt19937_64 rng(51);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const double a = nd(rng), b = nd(rng), w = 1 + std::abs(nd(rng));
    const State s{a + b * (w * spectral.grid().nodes()).cos(), 0.5 + std::abs(nd(rng)), 0.0};
    const DriftSplit d1 = spectral.assemble_drift(s), d2 = scalar.assemble_drift(s);
    EXPECT_LE(max_abs(d1.explicit_f - d2.explicit_f), 1e-12 * (1 + max_abs(d2.explicit_f)));
    EXPECT_LE(std::abs(d1.explicit_L - d2.explicit_L), 1e-12 * (1 + std::abs(d2.explicit_L)));
    const auto r1 = spectral.assemble_diffusion(s), r2 = scalar.assemble_diffusion(s);
    EXPECT_LE(max_abs(r1[0].b_f - r2[0].b_f), 1e-12 * (1 + max_abs(r2[0].b_f)));
    EXPECT_LE(std::abs(r1[0].b_L - r2[0].b_L), 1e-12 * (1 + std::abs(r2[0].b_L)));
    EXPECT_EQ(max_abs(r1[1].b_f), 0.0);
    EXPECT_EQ(r1[2].b_L, 0.0);
  }
}

// ----------------------------------- geometric meaning of the drift of f

namespace {

// Trigonometric interpolant of periodic samples on [0,1).
struct FourierInterpolant {
  std::vector<std::complex<double>> c;
  explicit FourierInterpolant(const Field& v) : c(v.size()) {
    const int n = static_cast<int>(v.size());
    for (int k = 0; k < n; ++k) {
      std::complex<double> s = 0;
      for (int j = 0; j < n; ++j) s += v[j] * std::polar(1.0, -2 * pi * k * j / n);
      c[k] = s / static_cast<double>(n);
    }
  }
  double operator()(double r) const {
    const int n = static_cast<int>(c.size());
    double out = c[0].real() + (c[n / 2] * std::cos(pi * n * r)).real();
    for (int k = 1; k < n / 2; ++k) out += 2 * (c[k] * std::polar(1.0, 2 * pi * k * r)).real();
    return out;
  }
};

// Moves the curve of (f, L) by eps * V along the inward normal and returns the
// rescaled curvature and length of the result, measured from the moved base point.
State move_along_normal(const Grid& g, const State& s, const Field& V, double eps) {
  const CurveSample c = reconstruct(g, s);
  const int n = g.n();
  Field x(n), y(n);
  for (int j = 0; j < n; ++j) {
    x[j] = c.points[j].x() - eps * V[j] * std::sin(c.theta[j]);
    y[j] = c.points[j].y() + eps * V[j] * std::cos(c.theta[j]);
  }
  const Field x1 = g.deriv(x, 1), y1 = g.deriv(y, 1);
  const Field x2 = g.deriv(x, 2), y2 = g.deriv(y, 2);
  const Field speed = (x1.square() + y1.square()).sqrt();
  const Field k = (x1 * y2 - y1 * x2) / speed.cube();
  const double L = g.integrate(speed);
  const Field arc = g.cumulative_integral(speed);
  const FourierInterpolant k_of_r(k), speed_of_r(speed), wobble(arc - L * g.nodes());

  State out{Field(n), L, 0.0};
  for (int j = 0; j < n; ++j) {
    const double target = g.nodes()[j] * L;
    double r = g.nodes()[j];
    for (int it = 0; it < 50; ++it) {
      const double step = (L * r + wobble(r) - target) / speed_of_r(r);
      r -= step;
      if (std::abs(step) < 1e-15) break;
    }
    out.f[j] = k_of_r(r);
  }
  return out;
}

}  // namespace

TEST(Flows, DriftIsCurvatureChangeUnderNormalMotion) {
  const int n = 64;
  for (auto kind : {FlowKind::Willmore, FlowKind::CurveDiffusion}) {
    const auto op = make(kind, Topology::Closed, NoiseModel::scalar(0.0), n);
    const Grid& g = op.grid();
    State s;
    s.f = oracle::ellipse_curvature(1.2, 0.9, g.nodes(), s.L);
    const Field f2 = g.deriv(s.f, 2);
    Field V = -f2 / (s.L * s.L);
    if (kind == FlowKind::Willmore) V -= 0.5 * s.f.cube();

    const double eps = 1e-5;
    const State plus = move_along_normal(g, s, V, eps);
    const State minus = move_along_normal(g, s, V, -eps);
    const Field rate_f = (plus.f - minus.f) / (2 * eps);
    const double rate_L = (plus.L - minus.L) / (2 * eps);

    const FlowTerms t = op.evaluate(s, false);
    const Field drift = t.stiff + t.deterministic_f;
    SCOPED_TRACE(to_string(kind));
    EXPECT_LT(max_abs(rate_f - drift), 1e-5 * (1 + max_abs(drift)));
    EXPECT_NEAR(rate_L, t.deterministic_L, 1e-7);
  }
}
