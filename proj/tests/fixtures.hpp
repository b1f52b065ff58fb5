#pragma once

#include "npspec/assembly.hpp"
#include "npspec/mesh.hpp"
#include "npspec/spectrum.hpp"

namespace fixtures {

struct Solved {
  npspec::PanelMesh mesh;
  npspec::OperatorPair ops;
  npspec::Spectrum spectrum;
};

inline Solved solve(npspec::SurfaceKind kind, int n_u, int n_v) {
  Solved s{npspec::triangulate(npspec::build_surface(kind), n_u, n_v), {}, {}};
  s.ops = npspec::assemble_operators(s.mesh);
  s.spectrum = npspec::solve_spectrum(s.ops.single_layer, s.ops.np_adjoint);
  return s;
}

// Unit sphere, 960 panels; shared by several suites.
inline const Solved& sphere_1k() {
  static const Solved s = solve(npspec::SurfaceKind::Sphere, 16, 32);
  return s;
}

} // namespace fixtures
