#include "npspec/kernels.hpp"

#include "npspec/error.hpp"

#include <cmath>

namespace npspec {

namespace {
constexpr double kFourPi = 4.0 * 3.14159265358979323846;

double checked_distance(const Vec3& d) {
  const double r = d.norm();
  if (!(r > 0.0)) throw ConfigError("kernel evaluated at coincident points");
  return r;
}
} // namespace

double gamma(const Vec3& x, const Vec3& y) {
  return 1.0 / (kFourPi * checked_distance(x - y));
}

Vec3 grad_gamma(const Vec3& x, const Vec3& y) {
  const Vec3 d = x - y;
  const double r = checked_distance(d);
  return -d / (kFourPi * r * r * r);
}

double dlp_kernel(const Vec3& x, const Vec3& y, const Vec3& normal_y) {
  const Vec3 d = x - y;
  const double r = checked_distance(d);
  return d.dot(normal_y) / (kFourPi * r * r * r);
}

double np_kernel(const Vec3& x, const Vec3& y, const Vec3& normal_y) {
  return -dlp_kernel(x, y, normal_y);
}

double flat_triangle_self_potential(const std::array<Vec3, 3>& tri, const Vec3& x) {
  // Split into three triangles with apex x. For the sub-triangle over edge
  // (a, b) at perpendicular distance h from x, int 1/r dA = h [asinh(s/h)]
  // between the signed foot coordinates s of a and b along the edge.
  double total = 0.0;
  for (int e = 0; e < 3; ++e) {
    const Vec3& a = tri[e];
    const Vec3& b = tri[(e + 1) % 3];
    const Vec3 edge = b - a;
    const double len = edge.norm();
    const Vec3 t = edge / len;
    const double sa = (a - x).dot(t);
    const double sb = (b - x).dot(t);
    const double h = ((a - x) - sa * t).norm();
    if (!(h > 0.0)) throw NumericalError("self-potential point lies on a panel edge");
    total += h * (std::asinh(sb / h) - std::asinh(sa / h));
  }
  return total / kFourPi;
}

} // namespace npspec
