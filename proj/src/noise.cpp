#include "curveflow/noise.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "curveflow/error.hpp"

namespace curveflow {

Field BasisFunction::eval(const Field& r, int order) const {
  if (order < 0 || order > 4) throw DomainError("basis derivative order must be in 0..4");
  if (shape == Shape::Constant) {
    return order == 0 ? Field::Constant(r.size(), coefficient) : Field::Zero(r.size());
  }
  const double k = 2.0 * std::numbers::pi * wavenumber;
  const Field phase = k * r;
  // Derivatives of cos cycle cos, -sin, -cos, sin; sin is cos shifted by a quarter turn.
  const int shift = order + (shape == Shape::Sine ? 3 : 0);
  const double scale = coefficient * std::pow(k, order);
  switch (shift % 4) {
    case 0: return scale * phase.cos();
    case 1: return -scale * phase.sin();
    case 2: return -scale * phase.cos();
    default: return scale * phase.sin();
  }
}

double BasisFunction::c4_norm() const {
  if (shape == Shape::Constant) return std::abs(coefficient);
  const double k = 2.0 * std::numbers::pi * wavenumber;
  return std::abs(coefficient) * (1.0 + k + k * k + k * k * k + k * k * k * k);
}

NoiseModel::NoiseModel(NoiseMode mode, std::vector<BasisFunction> basis, double amplitude)
    : mode_(mode), basis_(std::move(basis)), amplitude_(amplitude) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ConfigError("noise.amplitude", "must be finite and >= 0");
  }
}

NoiseModel NoiseModel::scalar(double amplitude) {
  return NoiseModel(NoiseMode::Scalar, {BasisFunction{}}, amplitude);
}

NoiseModel NoiseModel::spectral(int n_modes, double amplitude, double decay_exponent) {
  if (n_modes < 1) throw ConfigError("noise.n_modes", "must be >= 1");
  std::vector<BasisFunction> basis;
  basis.reserve(n_modes);
  for (int l = 1; l <= n_modes; ++l) {
    const int m = (l + 1) / 2;
    const auto shape = l % 2 == 1 ? BasisFunction::Shape::Cosine : BasisFunction::Shape::Sine;
    basis.push_back({shape, m, std::pow(static_cast<double>(m), -decay_exponent)});
  }
  return NoiseModel(NoiseMode::Spectral, std::move(basis), amplitude);
}

NoiseModel NoiseModel::custom(std::vector<BasisFunction> basis, double amplitude) {
  return NoiseModel(NoiseMode::Spectral, std::move(basis), amplitude);
}

Field NoiseModel::basis_eval(int l, int order, const Grid& grid) const {
  if (l < 1 || l > n_modes()) {
    throw DomainError("basis index " + std::to_string(l) + " outside 1.." +
                      std::to_string(n_modes()));
  }
  return basis_[l - 1].eval(grid.nodes(), order);
}

double NoiseModel::c4_sum() const {
  double sum = 0.0;
  for (const auto& phi : basis_) sum += phi.c4_norm();
  return sum;
}

void NoiseModel::check_summability(double bound) const {
  const double sum = c4_sum();
  if (!std::isfinite(sum) || sum > bound) {
    throw ConfigError("noise.c4_bound", "sum of C4 norms " + std::to_string(sum) +
                                            " exceeds bound " + std::to_string(bound));
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trajectory_index,
                          std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(trajectory_index ^ (stream * 0x9E3779B97F4A7C15ULL)));
}

BrownianDriver::BrownianDriver(std::uint64_t seed, std::uint64_t trajectory_index,
                               std::uint64_t stream)
    : seed_(seed), index_(trajectory_index), engine_(derive_seed(seed, trajectory_index, stream)) {}

double BrownianDriver::standard_normal() { return normal_(engine_); }

std::vector<double> BrownianDriver::increments(int n_modes, double dt) {
  if (!(dt > 0.0)) throw DomainError("increments: dt must be positive");
  if (n_modes < 1) throw DomainError("increments: n_modes must be >= 1");
  const double sd = std::sqrt(dt);
  std::vector<double> out(n_modes);
  for (double& x : out) x = sd * standard_normal();
  return out;
}

std::vector<std::vector<double>> bridge_split(std::span<const double> total, double dt, int pieces,
                                              BrownianDriver& bridge) {
  if (pieces < 1) throw DomainError("bridge_split: pieces must be >= 1");
  std::vector<std::vector<double>> out(pieces, std::vector<double>(total.size()));
  const double h = dt / pieces;
  for (std::size_t mode = 0; mode < total.size(); ++mode) {
    double remaining = total[mode];
    for (int i = 0; i < pieces - 1; ++i) {
      const double tau = dt - i * h;
      const double mean = remaining * h / tau;
      const double var = h * (tau - h) / tau;
      const double x = mean + std::sqrt(var) * bridge.standard_normal();
      out[i][mode] = x;
      remaining -= x;
    }
    out[pieces - 1][mode] = remaining;
  }
  return out;
}

}  // namespace curveflow
