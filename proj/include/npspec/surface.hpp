#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace npspec {

using Vec3 = Eigen::Vector3d;

enum class SurfaceKind { Sphere, OblateSpheroid, CliffordTorus };

std::string_view to_string(SurfaceKind kind);
SurfaceKind surface_kind_from_string(std::string_view name);

struct SurfaceParams {
  double radius = 1.0;              // sphere
  double equatorial = 1.4142135623730951; // spheroid semi-axes (a, a, c)
  double polar = 1.0;
  double major = 1.4142135623730951;      // torus tube centre radius
  double minor = 1.0;                     // torus tube radius
};

/// Chart value and analytic derivatives at one parameter point.
struct ChartJet {
  Vec3 x, xu, xv, xuu, xuv, xvv;
};

/// Second-order differential geometry at a chart point. L, M, N are taken
/// against the inward normal so that convex surfaces have positive
/// Gaussian and mean curvature.
struct CurvatureSample {
  double g11 = 0, g12 = 0, g22 = 0;
  double L = 0, M = 0, N = 0;
  double gaussian = 0;
  double mean = 0;

  double metric_det() const { return g11 * g22 - g12 * g12; }
};

/// Closed surface given by a chart (u, v) -> R^3.
///
/// Sphere and spheroid: u in [0, pi] is the polar angle (poles at u = 0, pi),
/// v in [0, 2pi) the azimuth. Torus: both u and v are periodic on [0, 2pi),
/// u runs around the tube and v around the symmetry axis (the z axis).
class ParametricSurface {
public:
  ParametricSurface(SurfaceKind kind, SurfaceParams params);

  SurfaceKind kind() const { return kind_; }
  const SurfaceParams& params() const { return params_; }

  bool periodic_u() const { return kind_ == SurfaceKind::CliffordTorus; }
  bool periodic_v() const { return true; }
  double u_max() const;
  double v_max() const { return 2.0 * kPi; }

  Vec3 point(double u, double v) const;
  ChartJet jet(double u, double v) const;
  /// Unit outward normal. Undefined at the poles of the sphere charts.
  Vec3 normal(double u, double v) const;

  /// Map a point near the surface onto it: radial scaling for the sphere
  /// and spheroid, nearest point for the torus.
  Vec3 project(const Vec3& p) const;
  /// Unit outward normal at a point on the surface.
  Vec3 normal_at(const Vec3& q) const;

  /// Signed indicator: negative strictly inside the solid, positive outside.
  double inside_indicator(const Vec3& p) const;
  bool contains(const Vec3& p) const { return inside_indicator(p) < 0.0; }

  double analytic_area() const;
  int euler_characteristic() const;
  /// +1 when xu x xv points outward, -1 when it points inward.
  int orientation() const;

  static constexpr double kPi = 3.14159265358979323846;

private:
  SurfaceKind kind_;
  SurfaceParams params_;
};

ParametricSurface build_surface(SurfaceKind kind, const SurfaceParams& params = {});

CurvatureSample curvature_at(const ParametricSurface& surface, double u, double v);

/// Euclidean distance from p to the surface, by multi-start Newton over the
/// chart seeded from a dense parameter sample.
double distance_to_surface(const ParametricSurface& surface, const Vec3& p);

/// Distance from p to the closed solid bounded by the surface (zero inside).
double distance_to_solid(const ParametricSurface& surface, const Vec3& p);

} // namespace npspec
