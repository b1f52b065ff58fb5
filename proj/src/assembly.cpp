#include "npspec/assembly.hpp"

#include "npspec/error.hpp"
#include "npspec/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace npspec {

namespace {

constexpr double kInvFourPi = 1.0 / (4.0 * 3.14159265358979323846);

using Ref = Eigen::Vector2d;

// Sub-triangle of the reference triangle, integrated with the rule after
// recursive 4-fold splitting near the target.
template <class F>
double integrate_rec(const PanelMesh& mesh, std::size_t p, const std::array<Ref, 3>& ref, const Vec3& target,
                     const QuadratureRule& rule, double near_factor, int depth, const F& f) {
  if (depth > 0) {
    const Vec3 a = map_reference_point(mesh, p, ref[0].x(), ref[0].y());
    const Vec3 b = map_reference_point(mesh, p, ref[1].x(), ref[1].y());
    const Vec3 c = map_reference_point(mesh, p, ref[2].x(), ref[2].y());
    const double diam = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    if ((target - (a + b + c) / 3.0).norm() < near_factor * diam) {
      const Ref m01 = 0.5 * (ref[0] + ref[1]);
      const Ref m12 = 0.5 * (ref[1] + ref[2]);
      const Ref m20 = 0.5 * (ref[2] + ref[0]);
      return integrate_rec(mesh, p, {ref[0], m01, m20}, target, rule, near_factor, depth - 1, f) +
             integrate_rec(mesh, p, {m01, ref[1], m12}, target, rule, near_factor, depth - 1, f) +
             integrate_rec(mesh, p, {m20, m12, ref[2]}, target, rule, near_factor, depth - 1, f) +
             integrate_rec(mesh, p, {m01, m12, m20}, target, rule, near_factor, depth - 1, f);
    }
  }
  const Ref e1 = ref[1] - ref[0], e2 = ref[2] - ref[0];
  const double det = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
  double s = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const Ref r = ref[0] + rule.nodes[q].x() * e1 + rule.nodes[q].y() * e2;
    const SurfacePoint sp = map_reference(mesh, p, r.x(), r.y());
    s += rule.weights[q] * sp.jacobian * f(sp);
  }
  return s * det;
}

const std::array<Ref, 3> kUnitTriangle = {Ref(0.0, 0.0), Ref(1.0, 0.0), Ref(0.0, 1.0)};

// Quadrature points of every panel, precomputed.
struct PanelRule {
  std::vector<Vec3> points;    // panel-major, rule.size() per panel
  std::vector<Vec3> normals;
  std::vector<double> weights; // includes the area element
  std::size_t per_panel = 0;
};

PanelRule map_rule(const PanelMesh& mesh, const QuadratureRule& rule) {
  PanelRule pr;
  pr.per_panel = rule.size();
  const std::size_t total = mesh.size() * rule.size();
  pr.points.reserve(total);
  pr.normals.reserve(total);
  pr.weights.reserve(total);
  for (std::size_t p = 0; p < mesh.size(); ++p)
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const SurfacePoint sp = map_reference(mesh, p, rule.nodes[q].x(), rule.nodes[q].y());
      pr.points.push_back(sp.x);
      pr.normals.push_back(sp.normal);
      pr.weights.push_back(rule.weights[q] * sp.jacobian);
    }
  return pr;
}

bool is_near(const PanelMesh& mesh, std::size_t p, const Vec3& target, double factor) {
  return (target - mesh.centroids[p]).norm() < factor * mesh.diameters[p];
}

} // namespace

void parallel_rows(Eigen::Index n, int threads, const std::function<void(Eigen::Index, Eigen::Index)>& body) {
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(std::max<Eigen::Index>(n, 1))));
  if (t == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (n + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    const Eigen::Index b = k * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(body, b, e);
  }
  for (auto& th : pool) th.join();
}

double integrate_panel(const PanelMesh& mesh, std::size_t p, const Vec3& target, const QuadratureRule& rule,
                       double near_factor, int max_depth, const std::function<double(const SurfacePoint&)>& f) {
  return integrate_rec(mesh, p, kUnitTriangle, target, rule, near_factor, max_depth, f);
}

double self_potential(const PanelMesh& mesh, std::size_t p, int gauss_points) {
  if (!mesh.surface) {
    const auto& t = mesh.triangles[p];
    return flat_triangle_self_potential({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]},
                                        mesh.centroids[p]);
  }
  std::vector<double> x, w;
  gauss_legendre_01(gauss_points, x, w);
  const Ref centre(1.0 / 3.0, 1.0 / 3.0);
  const Vec3& target = mesh.centroids[p];
  double total = 0.0;
  for (int e = 0; e < 3; ++e) {
    const Ref a = kUnitTriangle[e], b = kUnitTriangle[(e + 1) % 3];
    // r(s, t) = centre + s (a - centre + t (b - a)); reference area element
    // s |det(a - centre, b - a)|, which cancels the 1/|x - y| singularity.
    const Ref da = a - centre, ab = b - a;
    const double det = std::abs(da.x() * ab.y() - da.y() * ab.x());
    for (int i = 0; i < gauss_points; ++i)
      for (int k = 0; k < gauss_points; ++k) {
        const double s = x[i], t = x[k];
        const Ref r = centre + s * (da + t * ab);
        const SurfacePoint sp = map_reference(mesh, p, r.x(), r.y());
        total += w[i] * w[k] * s * det * sp.jacobian / (target - sp.x).norm();
      }
  }
  return total * kInvFourPi;
}

Eigen::VectorXd OperatorPair::surface_potential(const Eigen::VectorXd& density) const {
  return (single_layer * density).cwiseQuotient(weights);
}

Eigen::MatrixXd assemble_potential_matrix(const PanelMesh& mesh, const AssemblyOptions& options) {
  const QuadratureRule rule = triangle_rule(options.quadrature_degree);
  const PanelRule pr = map_rule(mesh, rule);
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.size());
  Eigen::MatrixXd C(n, n);
  parallel_rows(n, options.threads, [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i) {
      const Vec3& x = mesh.centroids[i];
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = static_cast<std::size_t>(j);
        if (i == j) {
          C(i, j) = self_potential(mesh, pj);
        } else if (is_near(mesh, pj, x, options.near_field_factor)) {
          C(i, j) = integrate_rec(mesh, pj, kUnitTriangle, x, rule, options.near_field_factor,
                                  options.max_subdivision,
                                  [&](const SurfacePoint& y) { return gamma(x, y.x); });
        } else {
          double s = 0.0;
          const std::size_t off = pj * pr.per_panel;
          for (std::size_t q = 0; q < pr.per_panel; ++q) s += pr.weights[off + q] / (x - pr.points[off + q]).norm();
          C(i, j) = s * kInvFourPi;
        }
      }
    }
  });
  return C;
}

Eigen::MatrixXd assemble_double_layer(const PanelMesh& mesh, const AssemblyOptions& options,
                                      AssemblyDiagnostics* diagnostics) {
  const QuadratureRule rule = triangle_rule(options.quadrature_degree);
  const PanelRule pr = map_rule(mesh, rule);
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.size());
  Eigen::MatrixXd D(n, n);
  parallel_rows(n, options.threads, [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i) {
      const Vec3& x = mesh.centroids[i];
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = static_cast<std::size_t>(j);
        if (i == j) {
          D(i, j) = 0.0;
        } else if (is_near(mesh, pj, x, options.near_field_factor)) {
          D(i, j) = integrate_rec(mesh, pj, kUnitTriangle, x, rule, options.near_field_factor,
                                  options.max_subdivision,
                                  [&](const SurfacePoint& y) { return np_kernel(x, y.x, y.normal); });
        } else {
          double s = 0.0;
          const std::size_t off = pj * pr.per_panel;
          for (std::size_t q = 0; q < pr.per_panel; ++q) {
            const Vec3 d = pr.points[off + q] - x;
            const double r = d.norm();
            s += pr.weights[off + q] * d.dot(pr.normals[off + q]) / (r * r * r);
          }
          D(i, j) = s * kInvFourPi;
        }
      }
      // Row sums of the double layer equal 1/2 on a closed surface.
      double off_sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) off_sum += D(i, j);
      D(i, i) = 0.5 - off_sum;
    }
  });
  if (diagnostics) {
    diagnostics->large_diagonal_count = 0;
    diagnostics->max_abs_diagonal = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::abs(D(i, i));
      diagnostics->max_abs_diagonal = std::max(diagnostics->max_abs_diagonal, d);
      if (d > 0.5) ++diagnostics->large_diagonal_count;
    }
  }
  return D;
}

Eigen::MatrixXd assemble_single_layer(const PanelMesh& mesh, const AssemblyOptions& options,
                                      AssemblyDiagnostics* diagnostics) {
  if (options.quadrature_degree < 2) throw ConfigError("single layer needs quadrature degree >= 2");
  Eigen::MatrixXd G = assemble_potential_matrix(mesh, options);
  const Eigen::Index n = G.rows();
  for (Eigen::Index i = 0; i < n; ++i) G.row(i) *= mesh.areas[static_cast<std::size_t>(i)];
  if (diagnostics) {
    const double scale = G.cwiseAbs().maxCoeff();
    diagnostics->single_layer_asymmetry = (G - G.transpose()).cwiseAbs().maxCoeff() / scale;
  }
  return 0.5 * (G + G.transpose());
}

Eigen::MatrixXd assemble_np_adjoint(const PanelMesh& mesh, const AssemblyOptions& options,
                                    AssemblyDiagnostics* diagnostics) {
  const Eigen::MatrixXd D = assemble_double_layer(mesh, options, diagnostics);
  const Eigen::Map<const Eigen::VectorXd> w(mesh.areas.data(), static_cast<Eigen::Index>(mesh.size()));
  // K* = W^-1 D^T W
  Eigen::MatrixXd K = D.transpose();
  for (Eigen::Index i = 0; i < K.rows(); ++i) K.row(i) /= w(i);
  for (Eigen::Index j = 0; j < K.cols(); ++j) K.col(j) *= w(j);
  return K;
}

OperatorPair assemble_operators(const PanelMesh& mesh, const AssemblyOptions& options) {
  OperatorPair ops;
  ops.single_layer = assemble_single_layer(mesh, options, &ops.diagnostics);
  ops.np_adjoint = assemble_np_adjoint(mesh, options, &ops.diagnostics);
  ops.weights = Eigen::Map<const Eigen::VectorXd>(mesh.areas.data(), static_cast<Eigen::Index>(mesh.size()));
  return ops;
}

double calderon_residual(const Eigen::MatrixXd& single_layer, const Eigen::MatrixXd& np_adjoint) {
  if (single_layer.rows() != np_adjoint.rows() || single_layer.cols() != np_adjoint.cols())
    throw ConfigError("calderon_residual: dimension mismatch");
  const Eigen::MatrixXd P = single_layer * np_adjoint;
  return (P - P.transpose()).norm() / P.norm();
}

} // namespace npspec
