#pragma once

#include <memory>
#include <vector>

#include "curveflow/grid.hpp"
#include "curveflow/noise.hpp"

namespace curveflow {

enum class FlowKind { Willmore, CurveDiffusion };

const char* to_string(FlowKind kind);

/// How the rescaled curvature f(r,t) = k(r L(t), t) is transported in r.
///
/// Arclength: r is normalised arclength measured from a material base point,
///   which adds the transport term d_r f * (int_0^r f V - r int_0^1 f V).
///   Turning number and enclosed area behave as for the geometric flow.
/// Dilation: only the uniform stretching term -r d_r f int_0^1 f V is kept.
enum class Transport { Arclength, Dilation };

const char* to_string(Transport transport);

struct FlowSpec {
  FlowKind kind = FlowKind::Willmore;
  Topology topology = Topology::Closed;
  Transport transport = Transport::Arclength;
  NoiseModel noise;
  /// Number of turns of a closed curve; scalar noise on closed curves uses
  /// int_0^L k ds = 2 pi * winding.
  int winding = 1;
  /// Regression switch: reverses the sign of the fourth-order term.
  bool flip_stiff_sign = false;

  bool uses_turning_identity() const noexcept {
    return topology == Topology::Closed && noise.mode() == NoiseMode::Scalar;
  }
  double stiff_sign() const noexcept { return flip_stiff_sign ? -1.0 : 1.0; }
};

/// Rescaled curvature f on the grid, curve length L and time t.
struct State {
  Field f;
  double L = 1.0;
  double t = 0.0;
};

/// Ito drift of (f, L) split into the implicit constant-coefficient part and
/// everything else.
struct DriftSplit {
  Field stiff;       ///< -(1/L^4) d^4 f
  Field explicit_f;  ///< remaining f drift, Ito correction included
  double explicit_L = 0.0;
};

/// Noise coefficients of (f, L) for one Brownian mode.
struct DiffusionRow {
  Field b_f;
  double b_L = 0.0;
};

/// Extra drift produced by converting the Stratonovich system to Ito form.
struct ItoCorrection {
  Field f;
  double L = 0.0;
};

/// Every term of one evaluation.  The Stratonovich drift is
/// stiff + deterministic_f; the Ito drift adds correction.
struct FlowTerms {
  Field stiff;
  Field deterministic_f;
  double deterministic_L = 0.0;
  Field correction_f;
  double correction_L = 0.0;
  std::vector<DiffusionRow> rows;
};

/// Assembles drift, diffusion and Ito correction for one flow variant.
///
/// All variants come from the normal-speed operator
///   G(f,L)[V] = ( (1/L^2) V_rr + f^2 V + f_r Phi[V],  -L int f V ),
/// applied to the deterministic speed (V = -(f_rr/L^2 + f^3/2) for Willmore,
/// V = -f_rr/L^2 for curve diffusion) and to each noise profile
/// v_l = amplitude * phi_l.  The Ito correction is 1/2 sum_l DB_l[B_l]
/// written out in closed form.
class FlowOperator {
 public:
  FlowOperator(std::shared_ptr<const Grid> grid, FlowSpec spec);

  const Grid& grid() const noexcept { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const noexcept { return grid_; }
  const FlowSpec& spec() const noexcept { return spec_; }

  FlowTerms evaluate(const State& state, bool with_noise) const;

  DriftSplit assemble_drift(const State& state) const;
  std::vector<DiffusionRow> assemble_diffusion(const State& state) const;
  ItoCorrection ito_correction(const State& state) const;

  /// Throws DomainError unless L > 0 and f is finite with one value per node.
  void check_state(const State& state) const;

 private:
  struct Profile {
    Field v, v1, v2, v3;
    bool constant = false;
  };

  std::shared_ptr<const Grid> grid_;
  FlowSpec spec_;
  std::vector<Profile> profiles_;
};

}  // namespace curveflow
