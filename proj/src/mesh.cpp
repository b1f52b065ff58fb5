#include "npspec/mesh.hpp"

#include "npspec/error.hpp"
#include "npspec/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <utility>

namespace npspec {

namespace {

struct Builder {
  PanelMesh& mesh;
  int orientation;

  void add(int a, int b, int c, double u, double v, int ring) {
    if (orientation > 0)
      mesh.triangles.push_back({a, b, c});
    else
      mesh.triangles.push_back({a, c, b});
    mesh.panel_uv.emplace_back(u, v);
    mesh.ring.push_back(ring);
  }
};

PanelMesh triangulate_torus(const ParametricSurface& surface, int n_u, int n_v) {
  PanelMesh mesh;
  const double du = surface.u_max() / n_u, dv = surface.v_max() / n_v;
  for (int i = 0; i < n_u; ++i)
    for (int k = 0; k < n_v; ++k) {
      mesh.vertex_uv.emplace_back(i * du, k * dv);
      mesh.vertices.push_back(surface.point(i * du, k * dv));
    }
  auto id = [&](int i, int k) { return (i % n_u) * n_v + (k % n_v); };
  Builder b{mesh, surface.orientation()};
  for (int i = 0; i < n_u; ++i)
    for (int k = 0; k < n_v; ++k) {
      const int a = id(i, k), bb = id(i + 1, k), c = id(i + 1, k + 1), d = id(i, k + 1);
      b.add(a, bb, c, (i + 2.0 / 3.0) * du, (k + 1.0 / 3.0) * dv, 2 * i);
      b.add(a, c, d, (i + 1.0 / 3.0) * du, (k + 2.0 / 3.0) * dv, 2 * i + 1);
    }
  return mesh;
}

// Latitude/longitude grid with a single vertex at each pole.
PanelMesh triangulate_polar(const ParametricSurface& surface, int n_u, int n_v) {
  PanelMesh mesh;
  const double du = surface.u_max() / n_u, dv = surface.v_max() / n_v;
  mesh.vertex_uv.emplace_back(0.0, 0.0);
  mesh.vertices.push_back(surface.point(0.0, 0.0));
  for (int i = 1; i < n_u; ++i)
    for (int k = 0; k < n_v; ++k) {
      mesh.vertex_uv.emplace_back(i * du, k * dv);
      mesh.vertices.push_back(surface.point(i * du, k * dv));
    }
  const int south = static_cast<int>(mesh.vertices.size());
  mesh.vertex_uv.emplace_back(surface.u_max(), 0.0);
  mesh.vertices.push_back(surface.point(surface.u_max(), 0.0));

  auto id = [&](int i, int k) { return 1 + (i - 1) * n_v + (k % n_v); };
  Builder b{mesh, surface.orientation()};
  int ring = 0;
  for (int k = 0; k < n_v; ++k)
    b.add(0, id(1, k), id(1, k + 1), 2.0 / 3.0 * du, (k + 0.5) * dv, ring);
  ++ring;
  for (int i = 1; i + 1 < n_u; ++i) {
    for (int k = 0; k < n_v; ++k) {
      const int a = id(i, k), bb = id(i + 1, k), c = id(i + 1, k + 1), d = id(i, k + 1);
      b.add(a, bb, c, (i + 2.0 / 3.0) * du, (k + 1.0 / 3.0) * dv, ring);
      b.add(a, c, d, (i + 1.0 / 3.0) * du, (k + 2.0 / 3.0) * dv, ring + 1);
    }
    ring += 2;
  }
  for (int k = 0; k < n_v; ++k)
    b.add(id(n_u - 1, k), south, id(n_u - 1, k + 1), surface.u_max() - 2.0 / 3.0 * du,
          (k + 0.5) * dv, ring);
  return mesh;
}

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

} // namespace

Vec3 map_reference_point(const PanelMesh& mesh, std::size_t p, double s, double t) {
  const auto& tri = mesh.triangles[p];
  const Vec3& a = mesh.vertices[tri[0]];
  const Vec3 xi = a + s * (mesh.vertices[tri[1]] - a) + t * (mesh.vertices[tri[2]] - a);
  return mesh.surface ? mesh.surface->project(xi) : xi;
}

SurfacePoint map_reference(const PanelMesh& mesh, std::size_t p, double s, double t) {
  const auto& tri = mesh.triangles[p];
  const Vec3& a = mesh.vertices[tri[0]];
  const Vec3 e1 = mesh.vertices[tri[1]] - a, e2 = mesh.vertices[tri[2]] - a;
  SurfacePoint sp;
  if (!mesh.surface) {
    const Vec3 cross = e1.cross(e2);
    sp.x = a + s * e1 + t * e2;
    sp.jacobian = cross.norm();
    sp.normal = cross / sp.jacobian;
    return sp;
  }
  const ParametricSurface& surf = *mesh.surface;
  const Vec3 xi = a + s * e1 + t * e2;
  sp.x = surf.project(xi);
  sp.normal = surf.normal_at(sp.x);
  // Central differences of the projection along the two edge directions.
  constexpr double h = 1e-5;
  const Vec3 qs = (surf.project(xi + h * e1) - surf.project(xi - h * e1)) / (2.0 * h);
  const Vec3 qt = (surf.project(xi + h * e2) - surf.project(xi - h * e2)) / (2.0 * h);
  sp.jacobian = qs.cross(qt).norm();
  return sp;
}

void compute_panel_geometry(PanelMesh& mesh) {
  const std::size_t n = mesh.triangles.size();
  mesh.centroids.resize(n);
  mesh.normals.resize(n);
  mesh.areas.resize(n);
  mesh.diameters.resize(n);
  mesh.flat_centroids.resize(n);
  mesh.flat_areas.resize(n);
  const QuadratureRule rule = triangle_rule(5);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& t = mesh.triangles[p];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const Vec3 cross = (b - a).cross(c - a);
    const double twice_area = cross.norm();
    if (!(twice_area > 0.0)) throw NumericalError("degenerate panel " + std::to_string(p));
    mesh.flat_centroids[p] = (a + b + c) / 3.0;
    mesh.flat_areas[p] = 0.5 * twice_area;
    mesh.diameters[p] = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    if (!mesh.surface) {
      mesh.centroids[p] = mesh.flat_centroids[p];
      mesh.normals[p] = cross / twice_area;
      mesh.areas[p] = mesh.flat_areas[p];
      continue;
    }
    const SurfacePoint sp = map_reference(mesh, p, 1.0 / 3.0, 1.0 / 3.0);
    mesh.centroids[p] = sp.x;
    mesh.normals[p] = sp.normal;
    double area = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      area += rule.weights[q] * map_reference(mesh, p, rule.nodes[q].x(), rule.nodes[q].y()).jacobian;
    mesh.areas[p] = area;
  }
}

PanelMesh triangulate(const ParametricSurface& surface, int n_u, int n_v) {
  if (n_u < 4 || n_v < 4) throw ConfigError("mesh resolution must satisfy n_u, n_v >= 4");
  PanelMesh mesh = surface.kind() == SurfaceKind::CliffordTorus
                       ? triangulate_torus(surface, n_u, n_v)
                       : triangulate_polar(surface, n_u, n_v);
  mesh.n_u = n_u;
  mesh.n_v = n_v;
  mesh.surface = surface;
  compute_panel_geometry(mesh);
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    const auto& t = mesh.triangles[p];
    const Vec3 flat_normal =
        (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    if (flat_normal.dot(mesh.normals[p]) <= 0.0)
      throw NumericalError("panel " + std::to_string(p) + " is not outward oriented");
  }
  return mesh;
}

double PanelMesh::total_area() const {
  double s = 0.0;
  for (double a : areas) s += a;
  return s;
}

double PanelMesh::typical_edge() const {
  std::vector<double> lengths;
  lengths.reserve(3 * triangles.size());
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) lengths.push_back((vertices[t[e]] - vertices[t[(e + 1) % 3]]).norm());
  if (lengths.empty()) return 0.0;
  auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
  std::nth_element(lengths.begin(), mid, lengths.end());
  return *mid;
}

int PanelMesh::euler_characteristic() const {
  std::set<std::uint64_t> edges;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      edges.insert(edge_key(std::min(a, b), std::max(a, b)));
    }
  return static_cast<int>(vertices.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(triangles.size());
}

bool PanelMesh::is_closed_orientable() const {
  std::map<std::uint64_t, int> directed;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) ++directed[edge_key(t[e], t[(e + 1) % 3])];
  for (const auto& [key, count] : directed) {
    if (count != 1) return false;
    const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
    auto rev = directed.find(edge_key(b, a));
    if (rev == directed.end() || rev->second != 1) return false;
  }
  return true;
}

void write_mesh(std::ostream& os, const PanelMesh& mesh) {
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    os << buf;
  }
  for (const auto& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

double willmore_energy(const ParametricSurface& surface, const PanelMesh& mesh) {
  double w = 0.0;
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    const CurvatureSample c = curvature_at(surface, mesh.panel_uv[p].x(), mesh.panel_uv[p].y());
    w += c.mean * c.mean * mesh.areas[p];
  }
  return w;
}

double total_gaussian_curvature(const ParametricSurface& surface, const PanelMesh& mesh) {
  double k = 0.0;
  for (std::size_t p = 0; p < mesh.size(); ++p)
    k += curvature_at(surface, mesh.panel_uv[p].x(), mesh.panel_uv[p].y()).gaussian * mesh.areas[p];
  return k;
}

SymbolPositivity symbol_positivity(const ParametricSurface& surface, const PanelMesh& mesh) {
  SymbolPositivity r;
  r.min_gaussian = std::numeric_limits<double>::infinity();
  r.max_gaussian = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    const double k = curvature_at(surface, mesh.panel_uv[p].x(), mesh.panel_uv[p].y()).gaussian;
    r.min_gaussian = std::min(r.min_gaussian, k);
    r.max_gaussian = std::max(r.max_gaussian, k);
  }
  // Genus-0 surfaces here: positive curvature everywhere <=> strictly convex.
  r.strictly_convex = r.min_gaussian > 0.0 && surface.euler_characteristic() == 2;
  return r;
}

} // namespace npspec
