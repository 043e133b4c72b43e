#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "curveflow/flows.hpp"
#include "curveflow/grid.hpp"

namespace curveflow {

using Point2 = Eigen::Vector2d;

/// Planar curve rebuilt from (f, L) by integrating theta' = k and gamma' = T.
///
/// Closed grids give n+1 points (r_j = j/n for j = 0..n, the last point being
/// gamma(L)); open grids give the n nodes, which already include both ends.
/// `theta` holds the tangent angle at every point, so tangents are exact.
struct CurveSample {
  Topology topology = Topology::Closed;
  std::vector<Point2> points;
  std::vector<double> theta;
  Point2 anchor = Point2::Zero();
  double theta0 = 0.0;
  double length = 0.0;
};

CurveSample reconstruct(const Grid& grid, const State& state, const Point2& anchor = Point2::Zero(),
                        double theta0 = 0.0);

/// |gamma(L) - gamma(0)|
double closure_defect(const CurveSample& curve);

struct AreaEstimate {
  double area = 0.0;
  /// Set when the curve fails to close to within 1e-3 L.
  bool advisory = false;
};

/// Signed area, counterclockwise positive, from Green's formula
/// 1/2 int (x dy - y dx) using the exact tangents of the sample.
AreaEstimate enclosed_area(const CurveSample& curve);

/// Vertex shoelace sum of a closed polygon (last vertex joined to the first).
double polygon_area(std::span<const Point2> polygon);

struct Functionals {
  double bending_energy = 0.0;  ///< 1/2 int k^2 ds
  double total_turning = 0.0;   ///< int k ds
  double length = 0.0;
};

Functionals functionals(const Grid& grid, const State& state);

/// Writes "x,y" rows with a header line.
void write_csv(std::ostream& os, const CurveSample& curve);

}  // namespace curveflow
