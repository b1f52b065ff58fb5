#include <doctest.h>

#include "npspec/error.hpp"
#include "npspec/plasmon.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace npspec;
using fixtures::sphere_1k;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Sum of u_j(z)^2 over a cluster of eigenvectors; rotation invariant for a
// full spherical-harmonic cluster.
double cluster_energy(const fixtures::Solved& s, Eigen::Index first, int count, const Vec3& z) {
  const std::array<Vec3, 1> pts{z};
  const Eigen::RowVectorXd row = potential_operator(s.mesh, pts).row(0);
  double e = 0;
  for (int k = 0; k < count; ++k) {
    const double u = row.dot(s.spectrum.vectors.col(first + k));
    e += u * u;
  }
  return e;
}
} // namespace

TEST_CASE("ball plasmons decay like r^-(n+1)") {
  const auto& s = sphere_1k();
  const Vec3 dir = Vec3(0.3, -0.5, 0.8).normalized();
  Eigen::Index first = 1;
  for (int n = 1; n <= 3; ++n) {
    const int count = 2 * n + 1;
    const double e1 = cluster_energy(s, first, count, 1.5 * dir), e2 = cluster_energy(s, first, count, 3.0 * dir);
    const double slope = 0.5 * std::log(e2 / e1) / std::log(3.0 / 1.5);
    CAPTURE(n);
    CHECK(slope == doctest::Approx(-(n + 1)).epsilon(0.2 / (n + 1)));
    first += count;
  }
}

TEST_CASE("plasmon gradient matches finite differences") {
  const auto& s = sphere_1k();
  const std::vector<Vec3> pts{Vec3(1.6, 0.2, -0.3), Vec3(0.1, 1.2, 0.9), Vec3(-2.0, -1.0, 0.5)};
  for (Eigen::Index j : {0, 2, 7, 20}) {
    const Eigen::VectorXd phi = s.spectrum.vectors.col(j);
    const auto g = evaluate_plasmon_gradient(s.mesh, phi, pts);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double h = 1e-4;
      Vec3 fd;
      for (int c = 0; c < 3; ++c) {
        Vec3 e = Vec3::Zero();
        e(c) = h;
        const std::vector<Vec3> pm{pts[k] + e, pts[k] - e};
        const Eigen::VectorXd u = evaluate_plasmon(s.mesh, phi, pm);
        fd(c) = (u(0) - u(1)) / (2 * h);
      }
      CHECK((fd - g[k]).norm() / g[k].norm() < 1e-4);
    }
  }
}

TEST_CASE("far field is the monopole") {
  const auto& s = sphere_1k();
  Eigen::VectorXd phi(static_cast<Eigen::Index>(s.mesh.size()));
  double charge = 0;
  for (std::size_t p = 0; p < s.mesh.size(); ++p) {
    phi(static_cast<Eigen::Index>(p)) = 1.0 + s.mesh.centroids[p].x();
    charge += phi(static_cast<Eigen::Index>(p)) * s.mesh.areas[p];
  }
  const std::vector<Vec3> far{Vec3(0, 0, 1e4)};
  CHECK(evaluate_plasmon(s.mesh, phi, far)(0) * 1e4 == doctest::Approx(charge / (4 * kPi)).epsilon(1e-3));
}

TEST_CASE("axisymmetric density has no azimuthal gradient in the y=0 plane") {
  const auto m = triangulate(build_surface(SurfaceKind::CliffordTorus), 12, 24);
  Eigen::VectorXd phi(static_cast<Eigen::Index>(m.size()));
  for (std::size_t p = 0; p < m.size(); ++p) phi(static_cast<Eigen::Index>(p)) = std::cos(m.panel_uv[p].x()) + 0.3;
  const std::vector<Vec3> pts{Vec3(3.0, 0, 0.5), Vec3(0.2, 0, 1.5), Vec3(2.0, 0, 1.6)};
  const auto g = evaluate_plasmon_gradient(m, phi, pts);
  for (const Vec3& v : g) CHECK(std::abs(v.y()) < 1e-2 * v.norm());
}

TEST_CASE("points on the surface are rejected") {
  const auto& s = sphere_1k();
  const std::vector<Vec3> on{s.mesh.centroids[5]};
  CHECK_THROWS_AS(evaluate_plasmon(s.mesh, s.spectrum.vectors.col(0), on), ConfigError);
  FieldOptions o;
  o.min_distance = 0.2;
  const std::vector<Vec3> near{Vec3(1.1, 0, 0)};
  CHECK_THROWS_AS(evaluate_plasmon(s.mesh, s.spectrum.vectors.col(0), near, o), ConfigError);
}

TEST_CASE("region norms") {
  const auto& s = sphere_1k();
  const auto sphere = build_surface(SurfaceKind::Sphere);
  const auto region = build_region(RegionKind::Y, sphere, s.mesh.typical_edge(), 32);
  std::vector<Eigen::Index> cols(16);
  std::iota(cols.begin(), cols.end(), Eigen::Index{0});
  FieldOptions o;
  o.azimuths = 7;
  const auto norms = region_l2_norms(s.mesh, s.spectrum, region, cols, o);
  for (double v : norms) CHECK(v >= 0);
  // Cluster n = 3 (columns 9..15) is weaker than cluster n = 1 (columns 1..3).
  double n1 = 0, n3 = 0;
  for (int k = 1; k <= 3; ++k) n1 += norms[k] * norms[k];
  for (int k = 9; k <= 15; ++k) n3 += norms[k] * norms[k];
  CHECK(n3 / 7 < n1 / 3);

  Spectrum zero = s.spectrum;
  zero.vectors.col(0).setZero();
  const std::vector<Eigen::Index> first{0};
  CHECK(region_l2_norms(s.mesh, zero, region, first)[0] == 0.0);
}

TEST_CASE("rotation-averaged norms do not depend on the basis of a degenerate cluster") {
  const auto& s = sphere_1k();
  const auto region = build_region(RegionKind::Y, build_surface(SurfaceKind::Sphere), 0.2, 24);
  FieldOptions o;
  o.azimuths = 9;
  Spectrum mixed = s.spectrum;
  // Rotate the basis of the n = 1 cluster (columns 1, 2).
  const double c = std::cos(0.7), sn = std::sin(0.7);
  mixed.vectors.col(1) = c * s.spectrum.vectors.col(1) + sn * s.spectrum.vectors.col(2);
  mixed.vectors.col(2) = -sn * s.spectrum.vectors.col(1) + c * s.spectrum.vectors.col(2);
  const std::vector<Eigen::Index> cols{1, 2};
  const auto a = region_l2_norms(s.mesh, s.spectrum, region, cols, o);
  const auto b = region_l2_norms(s.mesh, mixed, region, cols, o);
  CHECK(a[0] * a[0] + a[1] * a[1] == doctest::Approx(b[0] * b[0] + b[1] * b[1]).epsilon(1e-10));
}

TEST_CASE("decay fit on an exact power law") {
  std::vector<double> js, norms;
  for (int j = 1; j <= 80; ++j) {
    js.push_back(j);
    norms.push_back(0.7 * std::pow(j, -2.0));
  }
  std::vector<char> keep(js.size(), 1);
  const LineFit f = decay_fit(js, norms, keep);
  CHECK(std::abs(f.slope + 2.0) < 1e-6);
  std::vector<char> few(js.size(), 0);
  for (int k = 0; k < 20; ++k) few[k] = 1;
  CHECK_THROWS_AS(decay_fit(js, norms, few), ConfigError);
}

TEST_CASE("outlier detection on a spiked power law") {
  std::vector<double> logs;
  for (int j = 1; j <= 300; ++j) logs.push_back(-1.0 * std::log(j));
  const std::vector<std::size_t> spikes{69, 119, 199, 259};
  for (std::size_t i : spikes) logs[i] += std::log(10.0);
  const auto flagged = detect_outliers(logs);
  CHECK(flagged == spikes);
  // Deterministic: same input, same answer.
  CHECK(detect_outliers(logs) == flagged);
  CHECK(detect_outliers(std::vector<double>(logs.begin(), logs.begin() + 60)).empty());
  CHECK_THROWS_AS(detect_outliers(std::vector<double>(20, 0.0)), ConfigError);
  OutlierOptions even;
  even.window = 20;
  CHECK_THROWS_AS(detect_outliers(logs, even), ConfigError);
}

TEST_CASE("axisymmetry score") {
  const auto m = triangulate(build_surface(SurfaceKind::CliffordTorus), 10, 16);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.size()));
  CHECK(axisymmetry_score(m, one) == doctest::Approx(1.0));
  Eigen::VectorXd az(one.size()), ring(one.size());
  for (std::size_t p = 0; p < m.size(); ++p) {
    const Vec3& c = m.centroids[p];
    az(static_cast<Eigen::Index>(p)) = std::cos(std::atan2(c.y(), c.x()));
    ring(static_cast<Eigen::Index>(p)) = std::sin(m.panel_uv[p].x());
  }
  CHECK(axisymmetry_score(m, az) < 0.02);
  CHECK(axisymmetry_score(m, ring) > 0.999);
  PanelMesh bare = m;
  bare.ring.assign(m.size(), -1);
  CHECK_THROWS_AS(axisymmetry_score(bare, one), ConfigError);
}

TEST_CASE("kernel expansion on the sphere") {
  const auto& s = sphere_1k();
  const Vec3 z = Vec3(0.4, -0.3, 2.0).normalized() * 2.0;
  const auto full = kernel_expansion_residual(s.mesh, s.ops, s.spectrum, z, 17, s.spectrum.size() - 1);
  CHECK(full.relative < 0.05);
  const auto part = kernel_expansion_residual(s.mesh, s.ops, s.spectrum, z, 17, 3);
  CHECK(part.relative > full.relative);

  const ParsevalSums ps = parseval_partial_sums(s.mesh, s.ops, s.spectrum, z);
  for (std::size_t k = 1; k < ps.partial.size(); ++k) CHECK(ps.partial[k] >= ps.partial[k - 1]);
  CHECK(ps.partial.back() <= ps.bound * (1 + 1e-9));
}

TEST_CASE("decay report invariants") {
  const auto& s = sphere_1k();
  const auto region = build_region(RegionKind::Y, build_surface(SurfaceKind::Sphere), s.mesh.typical_edge(), 32);
  FieldOptions o;
  o.azimuths = 5;
  const DecayReport rep = decay_report(s.mesh, s.spectrum, region, 80, {}, o);
  CHECK(rep.rows.size() == 80);
  CHECK(rep.fit.count + rep.outliers.size() == rep.rows.size());
  for (const auto& r : rep.rows) CHECK(r.norm >= 0);
  // Convex case: decay faster than j^-1/2.
  CHECK(rep.fit.slope < -0.5);
  std::ostringstream os;
  write_norms_csv(os, rep);
  CHECK(os.str().rfind("j,lambda,norm,log_norm,outlier,axisymmetry\n", 0) == 0);
}
