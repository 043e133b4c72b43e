#include "curveflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <Eigen/SparseLU>
#include <fftw3.h>

#include "curveflow/error.hpp"

namespace curveflow {

namespace {

// The FFTW planner is not re-entrant; execution with the new-array API is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

const char* to_string(Topology topology) {
  return topology == Topology::Closed ? "closed" : "open";
}

struct Grid::Plans {
  int n = 0;
  int padded = 0;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  fftw_plan c2c = nullptr;
  fftw_plan r2c_pad = nullptr;
  fftw_plan c2r_pad = nullptr;

  explicit Plans(int size) : n(size), padded(3 * size / 2) {
    std::vector<double> real(std::max(n, padded));
    std::vector<std::complex<double>> cplx(std::max(n, padded));
    std::lock_guard<std::mutex> lock(planner_mutex());
    r2c = fftw_plan_dft_r2c_1d(n, real.data(), as_fftw(cplx.data()), kPlanFlags);
    c2r = fftw_plan_dft_c2r_1d(n, as_fftw(cplx.data()), real.data(), kPlanFlags);
    std::vector<std::complex<double>> cplx_out(n);
    c2c = fftw_plan_dft_1d(n, as_fftw(cplx.data()), as_fftw(cplx_out.data()), FFTW_FORWARD,
                           kPlanFlags);
    r2c_pad = fftw_plan_dft_r2c_1d(padded, real.data(), as_fftw(cplx.data()), kPlanFlags);
    c2r_pad = fftw_plan_dft_c2r_1d(padded, as_fftw(cplx.data()), real.data(), kPlanFlags);
  }

  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    for (fftw_plan p : {r2c, c2r, c2c, r2c_pad, c2r_pad}) {
      if (p != nullptr) fftw_destroy_plan(p);
    }
  }

  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order) {
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][order];
  return w;
}

Grid::Grid(Topology topology, int n, bool dealias)
    : topology_(topology), n_(n), dealias_(dealias && topology == Topology::Closed) {
  if (n < 8) throw DomainError("grid.n must be at least 8, got " + std::to_string(n));
  if (topology == Topology::Closed && n % 2 != 0) {
    throw DomainError("grid.n must be even on a closed grid, got " + std::to_string(n));
  }
  nodes_ = Field(n);
  const double h = spacing();
  for (int j = 0; j < n; ++j) nodes_[j] = j * h;

  if (topology == Topology::Closed) {
    plans_ = std::make_shared<const Plans>(n);
    return;
  }

  // Fourth-order stencils: centred where they fit, otherwise order+4 points
  // shifted against the boundary.
  stencils_.resize(4);
  for (int order = 1; order <= 4; ++order) {
    const int half = order <= 2 ? 2 : 3;
    const int width = order + 4;
    auto& table = stencils_[order - 1];
    table.resize(n);
    if (n < width) continue;
    for (int j = 0; j < n; ++j) {
      int start;
      int size;
      if (j - half >= 0 && j + half <= n - 1) {
        start = j - half;
        size = 2 * half + 1;
      } else {
        size = width;
        start = std::clamp(j - size / 2, 0, n - size);
      }
      std::vector<double> offsets(size);
      for (int i = 0; i < size; ++i) offsets[i] = static_cast<double>(start + i - j);
      auto w = fd_weights(0.0, offsets, order);
      const double scale = std::pow(h, -order);
      for (double& x : w) x *= scale;
      table[j] = Stencil{start, std::move(w)};
    }
  }
  if (n >= 8) biharmonic_ = fd_matrix(4);
}

double Grid::spacing() const noexcept {
  return topology_ == Topology::Closed ? 1.0 / n_ : 1.0 / (n_ - 1);
}

void Grid::check_field(const Field& f, const char* what) const {
  if (f.size() != n_) {
    throw DomainError(std::string(what) + ": field has " + std::to_string(f.size()) +
                      " values, grid has " + std::to_string(n_));
  }
  if (!f.allFinite()) throw DomainError(std::string(what) + ": field has non-finite values");
}

std::vector<std::complex<double>> Grid::forward(const Field& f) const {
  std::vector<double> in(f.data(), f.data() + n_);
  std::vector<std::complex<double>> out(n_ / 2 + 1);
  fftw_execute_dft_r2c(plans_->r2c, in.data(), as_fftw(out.data()));
  return out;
}

Field Grid::inverse(std::vector<std::complex<double>> spectrum) const {
  Field out(n_);
  fftw_execute_dft_c2r(plans_->c2r, as_fftw(spectrum.data()), out.data());
  out /= static_cast<double>(n_);
  return out;
}

std::vector<Field> Grid::derivs(const Field& f, int max_order) const {
  if (max_order < 1 || max_order > 4) {
    throw DomainError("derivative order must be in 1..4, got " + std::to_string(max_order));
  }
  check_field(f, "deriv");
  std::vector<Field> out;
  out.reserve(max_order + 1);
  out.push_back(f);

  if (topology_ == Topology::Open) {
    if (n_ < max_order + 4) throw DomainError("open grid too small for derivative order");
    for (int order = 1; order <= max_order; ++order) {
      Field d(n_);
      const auto& table = stencils(order);
      for (int j = 0; j < n_; ++j) {
        double acc = 0.0;
        const auto& s = table[j];
        for (std::size_t i = 0; i < s.weights.size(); ++i) acc += s.weights[i] * f[s.start + i];
        d[j] = acc;
      }
      out.push_back(std::move(d));
    }
    return out;
  }

  const auto spectrum = forward(f);
  const int nyquist = n_ / 2;
  for (int order = 1; order <= max_order; ++order) {
    std::vector<std::complex<double>> s(spectrum.size());
    // (i k)^order with k = 2 pi m, formed without complex pow.
    static constexpr std::complex<double> kUnitPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int m = 0; m <= nyquist; ++m) {
      const double k = 2.0 * std::numbers::pi * m;
      s[m] = spectrum[m] * (std::pow(k, order) * kUnitPowers[order % 4]);
    }
    // Odd derivatives of the Nyquist mode are not representable as real data.
    if (order % 2 == 1) s[nyquist] = 0.0;
    out.push_back(inverse(std::move(s)));
  }
  return out;
}

Field Grid::deriv(const Field& f, int order) const {
  if (order < 1 || order > 4) {
    throw DomainError("derivative order must be in 1..4, got " + std::to_string(order));
  }
  return std::move(derivs(f, order)[order]);
}

double Grid::integrate(const Field& f) const {
  check_field(f, "integrate");
  if (topology_ == Topology::Closed) return f.mean();
  return cumulative_integral(f)[n_ - 1];
}

Field Grid::cumulative_integral(const Field& g) const {
  check_field(g, "cumulative_integral");
  Field out(n_);
  if (topology_ == Topology::Open) {
    const double h = spacing();
    out[0] = 0.0;
    for (int j = 0; j + 1 < n_; ++j) {
      double piece;
      if (j == 0) {
        piece = 9 * g[0] + 19 * g[1] - 5 * g[2] + g[3];
      } else if (j == n_ - 2) {
        piece = g[n_ - 4] - 5 * g[n_ - 3] + 19 * g[n_ - 2] + 9 * g[n_ - 1];
      } else {
        piece = -g[j - 1] + 13 * g[j] + 13 * g[j + 1] - g[j + 2];
      }
      out[j + 1] = out[j] + h * piece / 24.0;
    }
    return out;
  }

  // Periodic antiderivative of the zero-mean part plus the linear mean part.
  auto s = forward(g);
  const double mean = s[0].real() / n_;
  s[0] = 0.0;
  const int nyquist = n_ / 2;
  for (int m = 1; m < nyquist; ++m) s[m] /= std::complex<double>(0.0, 2.0 * std::numbers::pi * m);
  s[nyquist] = 0.0;
  Field a = inverse(std::move(s));
  out = a - a[0] + mean * nodes_;
  return out;
}

Field Grid::product(const Field& a, const Field& b) const {
  if (!dealias_) return a * b;
  const int m = plans_->padded;
  const int nyquist = n_ / 2;
  auto pad = [&](const Field& f) {
    auto s = forward(f);
    std::vector<std::complex<double>> big(m / 2 + 1, 0.0);
    for (int k = 0; k < nyquist; ++k) big[k] = s[k];
    std::vector<double> out(m);
    fftw_execute_dft_c2r(plans_->c2r_pad, as_fftw(big.data()), out.data());
    for (double& x : out) x /= n_;
    return out;
  };
  auto pa = pad(a);
  const auto pb = pad(b);
  for (int i = 0; i < m; ++i) pa[i] *= pb[i];
  std::vector<std::complex<double>> big(m / 2 + 1);
  fftw_execute_dft_r2c(plans_->r2c_pad, pa.data(), as_fftw(big.data()));
  std::vector<std::complex<double>> s(nyquist + 1, 0.0);
  for (int k = 0; k < nyquist; ++k) s[k] = big[k] * (static_cast<double>(n_) / m);
  return inverse(std::move(s));
}

Eigen::SparseMatrix<double> Grid::fd_matrix(int order) const {
  std::vector<Eigen::Triplet<double>> entries;
  const auto& table = stencils(order);
  for (int j = 0; j < n_; ++j) {
    const auto& s = table[j];
    for (std::size_t i = 0; i < s.weights.size(); ++i) {
      entries.emplace_back(j, s.start + static_cast<int>(i), s.weights[i]);
    }
  }
  Eigen::SparseMatrix<double> m(n_, n_);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

StiffSymbol Grid::stiff_symbol(double L) const {
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("stiff_symbol: L must be positive");
  StiffSymbol sym;
  sym.topology = topology_;
  const double inv_l4 = 1.0 / (L * L * L * L);
  if (topology_ == Topology::Closed) {
    sym.multipliers = Field(n_ / 2 + 1);
    for (int m = 0; m <= n_ / 2; ++m) {
      sym.multipliers[m] = std::pow(2.0 * std::numbers::pi * m, 4) * inv_l4;
    }
  } else {
    sym.matrix = biharmonic_ * inv_l4;
  }
  return sym;
}

Field Grid::apply_biharmonic(const Field& f) const {
  if (topology_ == Topology::Open) return (biharmonic_ * f.matrix()).array();
  return deriv(f, 4);
}

Field Grid::solve_shifted_biharmonic(const Field& rhs, double c) const {
  check_field(rhs, "solve_shifted_biharmonic");
  if (topology_ == Topology::Closed) {
    auto s = forward(rhs);
    for (int m = 0; m <= n_ / 2; ++m) {
      s[m] /= 1.0 + c * std::pow(2.0 * std::numbers::pi * m, 4);
    }
    return inverse(std::move(s));
  }
  Eigen::SparseMatrix<double> a = c * biharmonic_;
  for (int j = 0; j < n_; ++j) a.coeffRef(j, j) += 1.0;
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw DomainError("banded biharmonic solve failed");
  Eigen::VectorXd x = lu.solve(rhs.matrix());
  return x.array();
}

std::vector<std::complex<double>> Grid::complex_dft(
    const std::vector<std::complex<double>>& z) const {
  if (topology_ != Topology::Closed) throw DomainError("complex_dft requires a closed grid");
  std::vector<std::complex<double>> in(z);
  std::vector<std::complex<double>> out(n_);
  fftw_execute_dft(plans_->c2c, as_fftw(in.data()), as_fftw(out.data()));
  return out;
}

}  // namespace curveflow
