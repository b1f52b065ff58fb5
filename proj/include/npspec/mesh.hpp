#pragma once

#include "npspec/surface.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace npspec {

/// Triangle discretization of a parametric surface on a structured (u, v)
/// grid. Vertices lie on the surface. When the surface is attached, each
/// panel is the image of its flat triangle under the surface projection,
/// so panels tile the surface exactly; without it panels are flat.
struct PanelMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector2d> vertex_uv;
  std::vector<std::array<int, 3>> triangles;
  std::optional<ParametricSurface> surface;

  /// Collocation point: the flat centroid, projected onto the surface.
  std::vector<Vec3> centroids;
  std::vector<Vec3> normals;   // unit, outward, at the collocation point
  std::vector<double> areas;   // panel areas (curved when the surface is attached)
  std::vector<double> diameters; // longest edge
  std::vector<Vec3> flat_centroids;
  std::vector<double> flat_areas;
  /// Chart parameters of each panel's centroid, seam-unwrapped.
  std::vector<Eigen::Vector2d> panel_uv;
  /// Rotation-orbit label: panels with the same ring map onto each other
  /// under rotation about the z axis by multiples of 2pi/n_v. -1 if the mesh
  /// carries no such structure.
  std::vector<int> ring;

  int n_u = 0;
  int n_v = 0;

  std::size_t size() const { return triangles.size(); }
  double total_area() const;
  /// Median edge length, used as the default exclusion margin.
  double typical_edge() const;
  int euler_characteristic() const;
  /// True when every undirected edge is shared by exactly two triangles
  /// with opposite orientations.
  bool is_closed_orientable() const;
  bool has_rings() const { return !ring.empty() && ring.front() >= 0; }
};

PanelMesh triangulate(const ParametricSurface& surface, int n_u, int n_v);

/// Recompute centroids, normals, areas and diameters from vertices/triangles.
void compute_panel_geometry(PanelMesh& mesh);

/// A point of a panel with its outward normal and the area element
/// |dq/ds x dq/dt| with respect to reference coordinates (s, t).
struct SurfacePoint {
  Vec3 x;
  Vec3 normal;
  double jacobian = 0;
};

/// Image of reference coordinates (s, t) of the triangle (0,0),(1,0),(0,1)
/// on panel p.
SurfacePoint map_reference(const PanelMesh& mesh, std::size_t p, double s, double t);
Vec3 map_reference_point(const PanelMesh& mesh, std::size_t p, double s, double t);

/// Plain text: "v x y z" vertex lines then "f i j k" faces, 1-based.
void write_mesh(std::ostream& os, const PanelMesh& mesh);

double willmore_energy(const ParametricSurface& surface, const PanelMesh& mesh);

struct SymbolPositivity {
  double min_gaussian = 0;
  double max_gaussian = 0;
  bool strictly_convex = false;
};

/// Sign check on the principal symbol of the NP operator through the
/// Gaussian curvature at panel centroids.
SymbolPositivity symbol_positivity(const ParametricSurface& surface, const PanelMesh& mesh);

/// Centroid quadrature of the analytic Gaussian curvature.
double total_gaussian_curvature(const ParametricSurface& surface, const PanelMesh& mesh);

} // namespace npspec
