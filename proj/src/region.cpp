#include "npspec/region.hpp"

#include "npspec/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace npspec {

RegionKind region_kind_from_string(std::string_view name) {
  if (name == "X" || name == "x") return RegionKind::X;
  if (name == "Y" || name == "y") return RegionKind::Y;
  throw ConfigError("unknown region kind '" + std::string(name) + "'");
}

CrossSectionRegion build_region(RegionKind kind, const ParametricSurface& surface, double margin,
                                int grid_n) {
  if (!(margin > 0.0)) throw ConfigError("region exclusion margin must be positive");
  if (grid_n < 16) throw ConfigError("region grid_n must be at least 16");

  CrossSectionRegion region;
  region.kind = kind;
  region.margin = margin;
  region.grid_n = grid_n;
  const double s2 = std::sqrt(2.0);
  if (kind == RegionKind::X) {
    region.x_max = 2.0 * s2;
    region.z_max = 2.0 * s2;
  } else {
    region.x_max = 1.5 * s2;
    region.z_max = 2.0;
  }
  const double hx = (region.x_max - region.x_min) / grid_n;
  const double hz = (region.z_max - region.z_min) / grid_n;
  region.cell_area = hx * hz;
  for (int iz = 0; iz < grid_n; ++iz)
    for (int ix = 0; ix < grid_n; ++ix) {
      const Vec3 p(region.x_min + (ix + 0.5) * hx, 0.0, region.z_min + (iz + 0.5) * hz);
      if (distance_to_solid(surface, p) > margin) {
        region.points.push_back(p);
        region.cells.push_back({ix, iz});
      }
    }
  if (region.points.empty()) throw ConfigError("region is empty; exclusion margin too large");
  return region;
}

void write_region_csv(std::ostream& os, const CrossSectionRegion& region) {
  os << "x,z,cell_area\n";
  char buf[96];
  for (const Vec3& p : region.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x(), p.z(), region.cell_area);
    os << buf;
  }
}

} // namespace npspec
