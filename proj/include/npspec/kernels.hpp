#pragma once

#include "npspec/surface.hpp"

#include <array>

namespace npspec {

/// Laplace fundamental solution 1/(4 pi |x - y|).
double gamma(const Vec3& x, const Vec3& y);

/// Gradient of gamma in x: -(x - y) / (4 pi |x - y|^3).
Vec3 grad_gamma(const Vec3& x, const Vec3& y);

/// Normal derivative of gamma in y: (x - y).nu_y / (4 pi |x - y|^3).
double dlp_kernel(const Vec3& x, const Vec3& y, const Vec3& normal_y);

/// Kernel of the NP double layer K[phi](x) = int (y - x).nu_y/(4 pi |x-y|^3) phi(y),
/// normalized so that K[1] = 1/2 on a closed surface. Equals -dlp_kernel.
double np_kernel(const Vec3& x, const Vec3& y, const Vec3& normal_y);

/// Exact integral of 1/(4 pi |x - y|) over a flat triangle, for x in the
/// plane of the triangle and strictly inside it.
double flat_triangle_self_potential(const std::array<Vec3, 3>& tri, const Vec3& x);

} // namespace npspec
