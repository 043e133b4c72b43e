#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "curveflow/grid.hpp"

namespace curveflow {

enum class NoiseMode { Scalar, Spectral };

/// One smooth spatial profile phi_l(r) of the intrinsic noise, given in
/// closed form so that derivatives are exact.
struct BasisFunction {
  enum class Shape { Constant, Cosine, Sine };

  Shape shape = Shape::Constant;
  int wavenumber = 0;
  double coefficient = 1.0;

  /// d^order/dr^order of coefficient * {1, cos(2 pi m r), sin(2 pi m r)}.
  Field eval(const Field& r, int order) const;
  /// sum_{k=0}^{4} sup |phi^(k)|
  double c4_norm() const;
};

/// Noise driving the flow: W(s,t) = amplitude * sum_l phi_l(s/L) b^l_t.
/// Scalar mode is the single profile phi_1 == 1.
class NoiseModel {
 public:
  NoiseModel() = default;

  static NoiseModel scalar(double amplitude);
  /// phi_{2m-1} = m^-p cos(2 pi m r), phi_{2m} = m^-p sin(2 pi m r), truncated to n_modes.
  static NoiseModel spectral(int n_modes, double amplitude, double decay_exponent = 6.0);
  static NoiseModel custom(std::vector<BasisFunction> basis, double amplitude);

  NoiseMode mode() const noexcept { return mode_; }
  int n_modes() const noexcept { return static_cast<int>(basis_.size()); }
  double amplitude() const noexcept { return amplitude_; }
  bool active() const noexcept { return amplitude_ > 0.0 && !basis_.empty(); }
  const std::vector<BasisFunction>& basis() const noexcept { return basis_; }

  /// Exact derivative of phi_l (1-based l) at the grid nodes, without amplitude.
  Field basis_eval(int l, int order, const Grid& grid) const;

  /// sum_l ||phi_l||_{C^4} over the retained modes.
  double c4_sum() const;
  /// Throws ConfigError if c4_sum() exceeds `bound`.
  void check_summability(double bound) const;

 private:
  NoiseModel(NoiseMode mode, std::vector<BasisFunction> basis, double amplitude);

  NoiseMode mode_ = NoiseMode::Scalar;
  std::vector<BasisFunction> basis_;
  double amplitude_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for (seed, trajectory_index, stream):
///   splitmix64(seed ^ splitmix64(index ^ (stream * 0x9E3779B97F4A7C15)))
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trajectory_index,
                          std::uint64_t stream = 0);

/// Seeded source of Brownian increments for one trajectory.  Copies continue
/// the same stream independently, which is how coupled runs share increments.
class BrownianDriver {
 public:
  BrownianDriver(std::uint64_t seed, std::uint64_t trajectory_index, std::uint64_t stream = 0);

  /// n_modes independent N(0, dt) samples.
  std::vector<double> increments(int n_modes, double dt);
  double standard_normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t trajectory_index() const noexcept { return index_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Splits increments accumulated over `dt` into `pieces` consecutive
/// increments over dt/pieces, sampled from the Brownian bridge.  The pieces
/// sum exactly (up to rounding) to `total`.
std::vector<std::vector<double>> bridge_split(std::span<const double> total, double dt, int pieces,
                                              BrownianDriver& bridge);

}  // namespace curveflow
