#include "npspec/surface.hpp"

#include "npspec/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace npspec {

namespace {

constexpr double kPi = ParametricSurface::kPi;

} // namespace

std::string_view to_string(SurfaceKind kind) {
  switch (kind) {
  case SurfaceKind::Sphere: return "sphere";
  case SurfaceKind::OblateSpheroid: return "oblate_spheroid";
  case SurfaceKind::CliffordTorus: return "clifford_torus";
  }
  return "unknown";
}

SurfaceKind surface_kind_from_string(std::string_view name) {
  if (name == "sphere") return SurfaceKind::Sphere;
  if (name == "oblate_spheroid" || name == "spheroid") return SurfaceKind::OblateSpheroid;
  if (name == "clifford_torus" || name == "torus") return SurfaceKind::CliffordTorus;
  throw ConfigError("unknown surface kind '" + std::string(name) + "'");
}

ParametricSurface::ParametricSurface(SurfaceKind kind, SurfaceParams params)
    : kind_(kind), params_(params) {
  switch (kind_) {
  case SurfaceKind::Sphere:
    if (!(params_.radius > 0.0)) throw ConfigError("sphere radius must be positive");
    break;
  case SurfaceKind::OblateSpheroid:
    if (!(params_.equatorial > 0.0) || !(params_.polar > 0.0))
      throw ConfigError("spheroid semi-axes must be positive");
    break;
  case SurfaceKind::CliffordTorus:
    if (!(params_.minor > 0.0) || !(params_.major > 0.0))
      throw ConfigError("torus radii must be positive");
    if (!(params_.major > params_.minor))
      throw ConfigError("torus major radius must exceed the minor radius");
    break;
  }
}

double ParametricSurface::u_max() const {
  return kind_ == SurfaceKind::CliffordTorus ? 2.0 * kPi : kPi;
}

ChartJet ParametricSurface::jet(double u, double v) const {
  const double su = std::sin(u), cu = std::cos(u), sv = std::sin(v), cv = std::cos(v);
  ChartJet j;
  if (kind_ == SurfaceKind::CliffordTorus) {
    const double R = params_.major, r = params_.minor;
    const double rho = R + r * cu;
    j.x = {rho * cv, rho * sv, r * su};
    j.xu = {-r * su * cv, -r * su * sv, r * cu};
    j.xv = {-rho * sv, rho * cv, 0.0};
    j.xuu = {-r * cu * cv, -r * cu * sv, -r * su};
    j.xuv = {r * su * sv, -r * su * cv, 0.0};
    j.xvv = {-rho * cv, -rho * sv, 0.0};
    return j;
  }
  const double a = kind_ == SurfaceKind::Sphere ? params_.radius : params_.equatorial;
  const double c = kind_ == SurfaceKind::Sphere ? params_.radius : params_.polar;
  j.x = {a * su * cv, a * su * sv, c * cu};
  j.xu = {a * cu * cv, a * cu * sv, -c * su};
  j.xv = {-a * su * sv, a * su * cv, 0.0};
  j.xuu = {-a * su * cv, -a * su * sv, -c * cu};
  j.xuv = {-a * cu * sv, a * cu * cv, 0.0};
  j.xvv = {-a * su * cv, -a * su * sv, 0.0};
  return j;
}

Vec3 ParametricSurface::point(double u, double v) const { return jet(u, v).x; }

Vec3 ParametricSurface::normal(double u, double v) const {
  if (kind_ == SurfaceKind::CliffordTorus) {
    return {std::cos(u) * std::cos(v), std::cos(u) * std::sin(v), std::sin(u)};
  }
  // Gradient of the implicit equation; regular at the poles.
  const Vec3 x = point(u, v);
  const double a = kind_ == SurfaceKind::Sphere ? params_.radius : params_.equatorial;
  const double c = kind_ == SurfaceKind::Sphere ? params_.radius : params_.polar;
  return Vec3(x.x() / (a * a), x.y() / (a * a), x.z() / (c * c)).normalized();
}

Vec3 ParametricSurface::project(const Vec3& p) const {
  if (kind_ == SurfaceKind::CliffordTorus) {
    const double rho = std::hypot(p.x(), p.y());
    const Vec3 centre = rho > 0.0 ? Vec3(params_.major * p.x() / rho, params_.major * p.y() / rho, 0.0)
                                  : Vec3(params_.major, 0.0, 0.0);
    const Vec3 d = p - centre;
    return centre + params_.minor * d / d.norm();
  }
  const double a = kind_ == SurfaceKind::Sphere ? params_.radius : params_.equatorial;
  const double c = kind_ == SurfaceKind::Sphere ? params_.radius : params_.polar;
  const double s = std::sqrt((p.x() * p.x() + p.y() * p.y()) / (a * a) + p.z() * p.z() / (c * c));
  return p / s;
}

Vec3 ParametricSurface::normal_at(const Vec3& q) const {
  if (kind_ == SurfaceKind::CliffordTorus) {
    const double rho = std::hypot(q.x(), q.y());
    const Vec3 centre(params_.major * q.x() / rho, params_.major * q.y() / rho, 0.0);
    return (q - centre).normalized();
  }
  const double a = kind_ == SurfaceKind::Sphere ? params_.radius : params_.equatorial;
  const double c = kind_ == SurfaceKind::Sphere ? params_.radius : params_.polar;
  return Vec3(q.x() / (a * a), q.y() / (a * a), q.z() / (c * c)).normalized();
}

double ParametricSurface::inside_indicator(const Vec3& p) const {
  switch (kind_) {
  case SurfaceKind::Sphere: return p.squaredNorm() / (params_.radius * params_.radius) - 1.0;
  case SurfaceKind::OblateSpheroid: {
    const double a = params_.equatorial, c = params_.polar;
    return (p.x() * p.x() + p.y() * p.y()) / (a * a) + p.z() * p.z() / (c * c) - 1.0;
  }
  case SurfaceKind::CliffordTorus: {
    const double rho = std::hypot(p.x(), p.y()) - params_.major;
    return (rho * rho + p.z() * p.z()) / (params_.minor * params_.minor) - 1.0;
  }
  }
  return 0.0;
}

double ParametricSurface::analytic_area() const {
  switch (kind_) {
  case SurfaceKind::Sphere: return 4.0 * kPi * params_.radius * params_.radius;
  case SurfaceKind::OblateSpheroid: {
    const double a = params_.equatorial, c = params_.polar;
    if (std::abs(a - c) < 1e-14 * a) return 4.0 * kPi * a * a;
    if (a > c) {
      const double e = std::sqrt(1.0 - c * c / (a * a));
      return 2.0 * kPi * a * a * (1.0 + (1.0 - e * e) / e * std::atanh(e));
    }
    const double e = std::sqrt(1.0 - a * a / (c * c));
    return 2.0 * kPi * a * a * (1.0 + c / (a * e) * std::asin(e));
  }
  case SurfaceKind::CliffordTorus: return 4.0 * kPi * kPi * params_.major * params_.minor;
  }
  return 0.0;
}

int ParametricSurface::euler_characteristic() const {
  return kind_ == SurfaceKind::CliffordTorus ? 0 : 2;
}

int ParametricSurface::orientation() const {
  return kind_ == SurfaceKind::CliffordTorus ? -1 : 1;
}

ParametricSurface build_surface(SurfaceKind kind, const SurfaceParams& params) {
  return ParametricSurface(kind, params);
}

CurvatureSample curvature_at(const ParametricSurface& surface, double u, double v) {
  const ChartJet j = surface.jet(u, v);
  const Vec3 inward = -surface.normal(u, v);
  CurvatureSample s;
  s.g11 = j.xu.dot(j.xu);
  s.g12 = j.xu.dot(j.xv);
  s.g22 = j.xv.dot(j.xv);
  s.L = j.xuu.dot(inward);
  s.M = j.xuv.dot(inward);
  s.N = j.xvv.dot(inward);
  const double det = s.metric_det();
  if (!(det > 0.0)) throw NumericalError("singular metric at chart point");
  s.gaussian = (s.L * s.N - s.M * s.M) / det;
  s.mean = (s.g22 * s.L - 2.0 * s.g12 * s.M + s.g11 * s.N) / (2.0 * det);
  return s;
}

namespace {

double wrap_or_clamp(const ParametricSurface& surface, double u) {
  if (surface.periodic_u()) return u;
  return std::clamp(u, 0.0, surface.u_max());
}

// Newton iteration on f(u,v) = |X(u,v) - p|^2 / 2 from one seed.
double refine_distance(const ParametricSurface& surface, const Vec3& p, double u, double v) {
  double best = (surface.point(u, v) - p).norm();
  for (int it = 0; it < 60; ++it) {
    const ChartJet j = surface.jet(u, v);
    const Vec3 d = j.x - p;
    const Eigen::Vector2d grad(j.xu.dot(d), j.xv.dot(d));
    Eigen::Matrix2d hess;
    hess << j.xu.dot(j.xu) + j.xuu.dot(d), j.xu.dot(j.xv) + j.xuv.dot(d),
        j.xu.dot(j.xv) + j.xuv.dot(d), j.xv.dot(j.xv) + j.xvv.dot(d);
    Eigen::Vector2d step;
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(hess);
    if (ldlt.isPositive() && ldlt.info() == Eigen::Success && hess.determinant() > 1e-14) {
      step = -ldlt.solve(grad);
    } else {
      const double scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-3);
      step = -grad / scale;
    }
    // Backtrack until the objective decreases.
    double t = 1.0;
    double nu = u, nv = v, dist = best;
    for (int bt = 0; bt < 30; ++bt) {
      nu = wrap_or_clamp(surface, u + t * step.x());
      nv = v + t * step.y();
      dist = (surface.point(nu, nv) - p).norm();
      if (dist <= best) break;
      t *= 0.5;
    }
    if (dist > best) break;
    const double moved = std::abs(nu - u) + std::abs(nv - v);
    u = nu;
    v = nv;
    best = dist;
    if (moved < 1e-13) break;
  }
  return best;
}

} // namespace

double distance_to_surface(const ParametricSurface& surface, const Vec3& p) {
  constexpr int su = 32, sv = 64;
  constexpr int kSeeds = 4;
  std::array<std::pair<double, std::array<double, 2>>, kSeeds> seeds;
  seeds.fill({std::numeric_limits<double>::infinity(), {0.0, 0.0}});
  const double umax = surface.u_max();
  const int su_count = surface.periodic_u() ? su : su + 1;
  for (int i = 0; i < su_count; ++i) {
    const double u = umax * i / su;
    for (int k = 0; k < sv; ++k) {
      const double v = surface.v_max() * k / sv;
      const double d = (surface.point(u, v) - p).squaredNorm();
      if (d < seeds.back().first) {
        seeds.back() = {d, {u, v}};
        std::sort(seeds.begin(), seeds.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [d2, uv] : seeds) {
    if (!std::isfinite(d2)) continue;
    best = std::min(best, refine_distance(surface, p, uv[0], uv[1]));
  }
  return best;
}

double distance_to_solid(const ParametricSurface& surface, const Vec3& p) {
  if (surface.contains(p)) return 0.0;
  return distance_to_surface(surface, p);
}

} // namespace npspec
