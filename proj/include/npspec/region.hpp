#pragma once

#include "npspec/surface.hpp"

#include <array>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace npspec {

enum class RegionKind { X, Y };

RegionKind region_kind_from_string(std::string_view name);

/// Uniform grid on a rectangle of the y = 0 half plane, with cells whose
/// centres lie within the exclusion margin of the solid removed.
struct CrossSectionRegion {
  RegionKind kind = RegionKind::X;
  double x_min = 0, x_max = 0, z_min = 0, z_max = 0;
  double margin = 0;
  int grid_n = 0;
  double cell_area = 0;
  std::vector<Vec3> points;
  /// Grid indices (ix, iz) of each retained point.
  std::vector<std::array<int, 2>> cells;
};

/// X: 0 < x < 2sqrt2, 0 < z < 2sqrt2 (torus). Y: 0 < x < 3sqrt2/2, 0 < z < 2
/// (spheroid). Points closer than `margin` to the solid are dropped.
CrossSectionRegion build_region(RegionKind kind, const ParametricSurface& surface, double margin,
                                int grid_n);

/// CSV with header "x,z,cell_area".
void write_region_csv(std::ostream& os, const CrossSectionRegion& region);

} // namespace npspec
