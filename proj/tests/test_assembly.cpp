#include <doctest.h>

#include "npspec/assembly.hpp"
#include "npspec/error.hpp"
#include "npspec/kernels.hpp"
#include "npspec/matrix_io.hpp"
#include "npspec/plasmon.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace npspec;

namespace {

struct Fixture {
  PanelMesh mesh;
  OperatorPair ops;
};

const Fixture& sphere_2k() {
  static const Fixture f = [] {
    Fixture x{triangulate(build_surface(SurfaceKind::Sphere), 24, 48), {}};
    x.ops = assemble_operators(x.mesh);
    return x;
  }();
  return f;
}

Eigen::VectorXd sample(const PanelMesh& m, int axis) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
  for (std::size_t p = 0; p < m.size(); ++p) v(static_cast<Eigen::Index>(p)) = m.centroids[p](axis);
  return v;
}

} // namespace

TEST_CASE("single layer of the uniform density on the unit sphere") {
  const auto& f = sphere_2k();
  REQUIRE(f.mesh.size() > 2000);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(f.ops.size());
  const Eigen::VectorXd u = f.ops.surface_potential(one);
  CHECK((u.array() - 1.0).abs().maxCoeff() < 0.02);

  const std::array<Vec3, 1> z{Vec3(2, 0, 0)};
  CHECK(evaluate_plasmon(f.mesh, one, z)(0) == doctest::Approx(0.5).epsilon(0.01));
  const Vec3 g = evaluate_plasmon_gradient(f.mesh, one, z)[0];
  CHECK((g - Vec3(-0.25, 0, 0)).norm() < 0.02 * 0.25);
}

TEST_CASE("single layer is symmetric positive definite") {
  const auto& f = sphere_2k();
  const Eigen::MatrixXd& S = f.ops.single_layer;
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() / S.cwiseAbs().maxCoeff() < 1e-3);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(S).info() == Eigen::Success);
  // The pre-symmetrization defect is reported, not hidden.
  CHECK(f.ops.diagnostics.single_layer_asymmetry > 0);
  CHECK(f.ops.diagnostics.single_layer_asymmetry < 0.05);
}

TEST_CASE("double layer row sums and the adjoint relation") {
  const PanelMesh m = triangulate(build_surface(SurfaceKind::CliffordTorus), 8, 12);
  const Eigen::MatrixXd D = assemble_double_layer(m);
  CHECK((D.rowwise().sum().array() - 0.5).abs().maxCoeff() < 1e-14);
  const Eigen::MatrixXd K = assemble_np_adjoint(m);
  const Eigen::Map<const Eigen::VectorXd> w(m.areas.data(), static_cast<Eigen::Index>(m.size()));
  const Eigen::MatrixXd expect = w.cwiseInverse().asDiagonal() * D.transpose() * w.asDiagonal();
  CHECK((K - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("NP operator on low-order harmonics of the sphere") {
  const auto& f = sphere_2k();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(f.ops.size());
  CHECK((f.ops.np_adjoint * one - 0.5 * one).cwiseAbs().maxCoeff() < 0.02);
  for (int axis = 0; axis < 3; ++axis) {
    const Eigen::VectorXd y = sample(f.mesh, axis);
    CHECK((f.ops.np_adjoint * y - y / 6.0).norm() / (y / 6.0).norm() < 0.03);
  }
}

TEST_CASE("Calderon residual under refinement") {
  const auto coarse_mesh = triangulate(build_surface(SurfaceKind::Sphere), 16, 32);
  const auto coarse = assemble_operators(coarse_mesh);
  const double r_coarse = calderon_residual(coarse.single_layer, coarse.np_adjoint);
  const auto& f = sphere_2k();
  const double r_fine = calderon_residual(f.ops.single_layer, f.ops.np_adjoint);
  CHECK(r_fine < 0.05);
  CHECK(r_fine < r_coarse);

  const auto torus_mesh = triangulate(build_surface(SurfaceKind::CliffordTorus), 16, 30);
  const auto torus = assemble_operators(torus_mesh);
  const double r_torus = calderon_residual(torus.single_layer, torus.np_adjoint);
  CHECK(r_torus < 0.05);
  CHECK(r_torus / r_coarse < 10.0);
  CHECK(r_coarse / r_torus < 10.0);

  const Eigen::MatrixXd P = coarse.single_layer * coarse.np_adjoint;
  const Eigen::MatrixXd Psym = 0.5 * (P + P.transpose());
  CHECK(calderon_residual(Eigen::MatrixXd::Identity(P.rows(), P.cols()), Psym) == 0.0);
}

TEST_CASE("assembly is independent of the thread count") {
  const auto m = triangulate(build_surface(SurfaceKind::CliffordTorus), 8, 14);
  AssemblyOptions one, many;
  many.threads = 3;
  const auto a = assemble_operators(m, one), b = assemble_operators(m, many);
  CHECK(a.single_layer == b.single_layer);
  CHECK(a.np_adjoint == b.np_adjoint);
}

TEST_CASE("curved self term approaches the flat one") {
  auto rel_gap = [](int nu, int nv) {
    const auto m = triangulate(build_surface(SurfaceKind::Sphere), nu, nv);
    const std::size_t p = m.size() / 2;
    const auto& t = m.triangles[p];
    const double flat = flat_triangle_self_potential({m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]},
                                                     m.flat_centroids[p]);
    return std::abs(self_potential(m, p) - flat) / flat;
  };
  const double coarse = rel_gap(8, 16), fine = rel_gap(32, 64);
  CHECK(fine < 0.05);
  CHECK(fine < coarse);
}

TEST_CASE("assembly rejects a low-order rule") {
  const auto m = triangulate(build_surface(SurfaceKind::Sphere), 4, 4);
  AssemblyOptions o;
  o.quadrature_degree = 1;
  CHECK_THROWS_AS(assemble_single_layer(m, o), ConfigError);
}

TEST_CASE("binary matrix dump round trip") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(7, 7), b = Eigen::MatrixXd::Random(7, 7);
  std::stringstream ss;
  write_matrix(ss, a);
  CHECK(read_matrix(ss) == a);
  const auto path = (std::filesystem::temp_directory_path() / "npspec_roundtrip.bin").string();
  write_matrices(path, {&a, &b});
  const auto back = read_matrices(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  std::filesystem::remove(path);
  std::stringstream bad("NOTAMATRIX0000000000000000");
  CHECK_THROWS(read_matrix(bad));
}
