#include "curveflow/geometry.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include "curveflow/error.hpp"

namespace curveflow {

namespace {

using cd = std::complex<double>;

// int_0^r exp(i x s) ds = r exp(i x r / 2) sinc(x r / 2)
cd exp_antiderivative(double x, double r) {
  const double half = 0.5 * x * r;
  const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  return r * sinc * std::polar(1.0, half);
}

void check(const Grid& grid, const State& state) {
  if (!(state.L > 0.0) || !std::isfinite(state.L)) {
    throw DomainError("reconstruct: L must be finite and positive");
  }
  grid.check_field(state.f, "reconstruct");
}

}  // namespace

CurveSample reconstruct(const Grid& grid, const State& state, const Point2& anchor, double theta0) {
  check(grid, state);
  const int n = grid.n();
  const double L = state.L;

  CurveSample curve;
  curve.topology = grid.topology();
  curve.anchor = anchor;
  curve.theta0 = theta0;
  curve.length = L;

  const Field angle = L * grid.cumulative_integral(state.f);

  if (grid.topology() == Topology::Open) {
    const Field theta = theta0 + angle;
    const Field x = L * grid.cumulative_integral(theta.cos());
    const Field y = L * grid.cumulative_integral(theta.sin());
    curve.points.reserve(n);
    curve.theta.assign(theta.data(), theta.data() + n);
    for (int j = 0; j < n; ++j) curve.points.emplace_back(anchor.x() + x[j], anchor.y() + y[j]);
    return curve;
  }

  // theta(r) = theta0 + omega r + P(r) with P periodic.  exp(i P) is expanded
  // in Fourier modes and each mode exp(i (omega + 2 pi m) r) integrated exactly.
  const double omega = L * grid.integrate(state.f);
  const Field& r = grid.nodes();
  const Field periodic = angle - omega * r;
  std::vector<cd> samples(n);
  for (int j = 0; j < n; ++j) samples[j] = std::polar(1.0, periodic[j]);
  auto coeffs = grid.complex_dft(samples);
  for (auto& c : coeffs) c /= static_cast<double>(n);

  std::vector<std::pair<double, cd>> modes;
  modes.reserve(n + 1);
  for (int k = 0; k < n; ++k) {
    const double x = omega + 2.0 * std::numbers::pi * (k <= n / 2 ? k : k - n);
    if (k == n / 2) {
      // Nyquist: share between +n/2 and -n/2.
      modes.emplace_back(x, 0.5 * coeffs[k]);
      modes.emplace_back(omega - std::numbers::pi * n, 0.5 * coeffs[k]);
    } else {
      modes.emplace_back(x, coeffs[k]);
    }
  }

  const cd base = L * std::polar(1.0, theta0);
  curve.points.reserve(n + 1);
  curve.theta.reserve(n + 1);
  for (int j = 0; j <= n; ++j) {
    const double rj = static_cast<double>(j) / n;
    cd z = 0.0;
    for (const auto& [x, c] : modes) z += c * exp_antiderivative(x, rj);
    z *= base;
    curve.points.emplace_back(anchor.x() + z.real(), anchor.y() + z.imag());
    curve.theta.push_back(j < n ? theta0 + angle[j] : theta0 + omega);
  }
  return curve;
}

double closure_defect(const CurveSample& curve) {
  if (curve.points.empty()) return 0.0;
  return (curve.points.back() - curve.points.front()).norm();
}

AreaEstimate enclosed_area(const CurveSample& curve) {
  AreaEstimate out;
  if (curve.points.size() < 3) return out;
  out.advisory = curve.topology != Topology::Closed ||
                 closure_defect(curve) > 1e-3 * curve.length;
  if (curve.topology != Topology::Closed) {
    out.area = polygon_area(curve.points);
    return out;
  }
  // Periodic trapezoid over r in [0,1); the closing point repeats r = 0.
  const std::size_t n = curve.points.size() - 1;
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = curve.length * std::cos(curve.theta[j]);
    const double dy = curve.length * std::sin(curve.theta[j]);
    const Point2 p = curve.points[j] - curve.anchor;
    sum += p.x() * dy - p.y() * dx;
  }
  out.area = 0.5 * sum / static_cast<double>(n);
  return out;
}

double polygon_area(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    sum += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * sum;
}

Functionals functionals(const Grid& grid, const State& state) {
  check(grid, state);
  Functionals out;
  out.length = state.L;
  out.total_turning = state.L * grid.integrate(state.f);
  out.bending_energy = 0.5 * state.L * grid.integrate(state.f.square());
  return out;
}

void write_csv(std::ostream& os, const CurveSample& curve) {
  os << "x,y\n";
  char buf[64];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.x(), p.y());
    os << buf;
  }
}

}  // namespace curveflow
