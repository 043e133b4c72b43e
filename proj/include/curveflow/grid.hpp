#pragma once

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace curveflow {

/// Values of a scalar function at the nodes of a Grid.
using Field = Eigen::ArrayXd;

enum class Topology { Closed, Open };

const char* to_string(Topology topology);

/// Constant-coefficient fourth-order operator (1/L^4) d^4/dr^4 on a grid.
/// Closed grids carry one real multiplier per retained Fourier mode
/// m = 0..n/2; open grids carry the banded finite-difference matrix.
struct StiffSymbol {
  Topology topology = Topology::Closed;
  Field multipliers;
  Eigen::SparseMatrix<double> matrix;
};

/// Uniform grid on the rescaled arclength r.
///
/// Closed: r_j = j/n on the circle [0,1), spectral (real FFT) calculus.
/// Open:   r_j = j/(n-1) on [0,1], fourth-order finite differences with
///         one-sided closures of matching order at the ends.
///
/// A Grid is immutable after construction and may be shared between threads;
/// every operation allocates its own scratch space.
class Grid {
 public:
  Grid(Topology topology, int n, bool dealias = false);

  Topology topology() const noexcept { return topology_; }
  int n() const noexcept { return n_; }
  bool dealias() const noexcept { return dealias_; }
  const Field& nodes() const noexcept { return nodes_; }
  /// Node spacing in r.
  double spacing() const noexcept;

  /// Discrete d^order/dr^order, order in 1..4.
  Field deriv(const Field& f, int order) const;

  /// First `max_order` derivatives from a single forward transform.
  /// Element k of the result holds the k-th derivative; element 0 is f.
  std::vector<Field> derivs(const Field& f, int max_order) const;

  /// Approximates the integral of f over [0,1].
  double integrate(const Field& f) const;

  /// Cumulative integral r -> int_0^r g, sampled at the nodes.
  Field cumulative_integral(const Field& g) const;

  /// Pointwise product, formed on a 3/2-padded grid when dealiasing is on.
  Field product(const Field& a, const Field& b) const;

  StiffSymbol stiff_symbol(double L) const;

  /// Solves (I + c d^4/dr^4) u = rhs.  Closed: per-mode division.
  /// Open: sparse LU of the banded matrix.
  Field solve_shifted_biharmonic(const Field& rhs, double c) const;

  /// Applies d^4/dr^4 exactly as the implicit operator does.
  Field apply_biharmonic(const Field& f) const;

  /// Forward complex DFT of length n (unnormalised); closed grids only.
  std::vector<std::complex<double>> complex_dft(const std::vector<std::complex<double>>& z) const;

  void check_field(const Field& f, const char* what) const;

 private:
  struct Stencil {
    int start = 0;
    std::vector<double> weights;
  };
  struct Plans;

  std::vector<std::complex<double>> forward(const Field& f) const;
  Field inverse(std::vector<std::complex<double>> spectrum) const;
  const std::vector<Stencil>& stencils(int order) const { return stencils_[order - 1]; }
  Eigen::SparseMatrix<double> fd_matrix(int order) const;

  Topology topology_;
  int n_;
  bool dealias_;
  Field nodes_;
  std::shared_ptr<const Plans> plans_;
  std::vector<std::vector<Stencil>> stencils_;
  Eigen::SparseMatrix<double> biharmonic_;
};

/// Finite-difference weights (Fornberg) for the derivative of order `order`
/// at `x0` using the given nodes.
std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order);

}  // namespace curveflow
