#pragma once

// Reference formulas written independently of the library: explicit
// closed-form drift/diffusion systems in the dilation parametrisation,
// analytic test states and quadrature.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace oracle {

constexpr double pi = std::numbers::pi;
using Vec = Eigen::ArrayXd;

/// f(r) = c0 + sum_m a_m cos(2 pi m r) + b_m sin(2 pi m r) with exact derivatives.
struct TrigState {
  double c0 = 0.0;
  std::vector<double> a, b;

  double eval(double r, int order) const {
    double v = order == 0 ? c0 : 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double k = 2.0 * pi * static_cast<double>(i + 1);
      const double kp = std::pow(k, order);
      // d^order cos(kr) = k^order cos(kr + order pi/2)
      v += kp * (a[i] * std::cos(k * r + order * pi / 2) + b[i] * std::sin(k * r + order * pi / 2));
    }
    return v;
  }

  Vec sample(const Vec& r, int order) const {
    Vec out(r.size());
    for (Eigen::Index j = 0; j < r.size(); ++j) out[j] = eval(r[j], order);
    return out;
  }

  /// Random smooth state with mean c0 and modes 1..modes of size `scale`.
  static TrigState random(std::mt19937_64& rng, double c0, int modes, double scale) {
    std::normal_distribution<double> nd;
    TrigState s;
    s.c0 = c0;
    for (int m = 1; m <= modes; ++m) {
      s.a.push_back(scale * nd(rng) / (m * m));
      s.b.push_back(scale * nd(rng) / (m * m));
    }
    return s;
  }
};

/// Composite Simpson rule on [0,1] with 2 * panels intervals.
inline double integrate01(const std::function<double(double)>& g, int panels = 4000) {
  const int m = 2 * panels;
  const double h = 1.0 / m;
  double s = g(0.0) + g(1.0);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return s * h / 3.0;
}

struct System {
  Vec drift_f;   // full Ito drift of f, fourth-order term included
  double drift_L = 0.0;
  Vec noise_f;
  double noise_L = 0.0;
};

/// Closed curve, Willmore, one Brownian motion, dilation parametrisation:
///   df = [-f''''/L^4 - (5 f^2/(2L^2) - 2 pi^2 r^2/L^2) f'' - (4 pi r/L) f f'
///         - (3/L^2) f f'^2 - f^5/2 + f^3 + (r/L^2) f' int f f'' + (r/2) f' int f^4] dt
///        + [f^2 - (2 pi r/L) f'] dW
///   dL = [(1/L) int f f'' + (L/2) int f^4] dt - 2 pi dW
inline System willmore_closed_scalar(const TrigState& s, double L, const Vec& r) {
  auto f = [&](double x) { return s.eval(x, 0); };
  auto f2 = [&](double x) { return s.eval(x, 2); };
  const double I_ff2 = integrate01([&](double x) { return f(x) * f2(x); });
  const double I_f4 = integrate01([&](double x) { return std::pow(f(x), 4); });
  const Vec F = s.sample(r, 0), F1 = s.sample(r, 1), F2 = s.sample(r, 2), F4 = s.sample(r, 4);
  const double L2 = L * L;
  System out;
  out.drift_f = -F4 / (L2 * L2) - (2.5 * F.square() / L2 - 2 * pi * pi * r.square() / L2) * F2 -
                (4 * pi / L) * r * F * F1 - (3 / L2) * F * F1.square() - 0.5 * F.pow(5) +
                F.cube() + (I_ff2 / L2) * r * F1 + 0.5 * I_f4 * r * F1;
  out.drift_L = I_ff2 / L + 0.5 * L * I_f4;
  out.noise_f = F.square() - (2 * pi / L) * r * F1;
  out.noise_L = -2 * pi;
  return out;
}

/// Open curve, Willmore, one Brownian motion, dilation parametrisation, with
/// I = int_0^1 f:
///   df = [-f''''/L^4 - (5/(2L^2)) f^2 f'' - (3/L^2) f f'^2 - f^5/2
///         + (r/L^2) f' int f f'' + (r/2) f' int f^4] dt
///      + [f^3 - 2 r I f f' + (r f' + r^2 f'') I^2 / 2 - (r f'/2) int f^2
///         + (r/2) f' I int r f'] dt
///      + (f^2 - r f' I) dW
///   dL = [(1/L) int f f'' + (L/2) int f^4] dt
///      + [-(L/2) int f^2 + (L/2) int (r f' + f) I] dt - L I dW
inline System willmore_open_scalar(const std::function<double(double, int)>& fn, double L,
                                   const Vec& r) {
  auto f = [&](double x) { return fn(x, 0); };
  const double I = integrate01(f);
  const double I_ff2 = integrate01([&](double x) { return f(x) * fn(x, 2); });
  const double I_f4 = integrate01([&](double x) { return std::pow(f(x), 4); });
  const double I_f2 = integrate01([&](double x) { return f(x) * f(x); });
  const double I_rf1 = integrate01([&](double x) { return x * fn(x, 1); });
  Vec F(r.size()), F1(r.size()), F2(r.size()), F4(r.size());
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    F[j] = fn(r[j], 0);
    F1[j] = fn(r[j], 1);
    F2[j] = fn(r[j], 2);
    F4[j] = fn(r[j], 4);
  }
  const double L2 = L * L;
  System out;
  out.drift_f = -F4 / (L2 * L2) - (2.5 / L2) * F.square() * F2 - (3 / L2) * F * F1.square() -
                0.5 * F.pow(5) + (I_ff2 / L2) * r * F1 + 0.5 * I_f4 * r * F1 + F.cube() -
                2 * I * r * F * F1 + 0.5 * I * I * (r * F1 + r.square() * F2) -
                0.5 * I_f2 * r * F1 + 0.5 * I * I_rf1 * r * F1;
  out.drift_L = I_ff2 / L + 0.5 * L * I_f4 - 0.5 * L * I_f2 + 0.5 * L * (I_rf1 + I) * I;
  out.noise_f = F.square() - I * r * F1;
  out.noise_L = -L * I;
  return out;
}

/// Closed curve, curve diffusion, one Brownian motion, dilation
/// parametrisation, with dissipative signs:
///   df = [-f''''/L^4 - (f^2 - 2 pi^2 r^2) f''/L^2 - (4 pi r/L) f f' + f^3
///         + (r/L^2) f' int f f''] dt + (f^2 - (2 pi r/L) f') dW
///   dL = (1/L) int f f'' dt - 2 pi dW
inline System curve_diffusion_closed_scalar(const TrigState& s, double L, const Vec& r) {
  const double I_ff2 = integrate01([&](double x) { return s.eval(x, 0) * s.eval(x, 2); });
  const Vec F = s.sample(r, 0), F1 = s.sample(r, 1), F2 = s.sample(r, 2), F4 = s.sample(r, 4);
  const double L2 = L * L;
  System out;
  out.drift_f = -F4 / (L2 * L2) - (F.square() - 2 * pi * pi * r.square()) * F2 / L2 -
                (4 * pi / L) * r * F * F1 + F.cube() + (I_ff2 / L2) * r * F1;
  out.drift_L = I_ff2 / L;
  out.noise_f = F.square() - (2 * pi / L) * r * F1;
  out.noise_L = -2 * pi;
  return out;
}

/// Length of a Willmore circle: R^4 = R0^4 + 2 t.
inline double circle_length(double L0, double t) {
  const double R0 = L0 / (2 * pi);
  return 2 * pi * std::pow(R0 * R0 * R0 * R0 + 2 * t, 0.25);
}

/// Curvature of the ellipse (a cos u, b sin u) sampled at normalised
/// arclength r_j, starting at u = 0.  Returns the perimeter in `length`.
inline Vec ellipse_curvature(double a, double b, const Vec& r, double& length) {
  auto speed = [&](double u) { return std::hypot(a * std::sin(u), b * std::cos(u)); };
  // s(u) by the periodic trapezoid rule on a fine grid plus Newton refinement.
  const int m = 20000;
  auto arc = [&](double u) {
    // Simpson on [0, u]
    const int k = 2 * std::max(2, static_cast<int>(m * u / (2 * pi)));
    const double h = u / k;
    double s = speed(0) + speed(u);
    for (int i = 1; i < k; ++i) s += (i % 2 ? 4.0 : 2.0) * speed(i * h);
    return s * h / 3.0;
  };
  length = arc(2 * pi);
  Vec k(r.size());
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    const double target = r[j] * length;
    double u = 2 * pi * r[j];
    for (int it = 0; it < 30; ++it) {
      const double du = (arc(u) - target) / speed(u);
      u -= du;
      if (std::abs(du) < 1e-15) break;
    }
    const double q = a * a * std::sin(u) * std::sin(u) + b * b * std::cos(u) * std::cos(u);
    k[j] = a * b / std::pow(q, 1.5);
  }
  return k;
}

}  // namespace oracle
