#include "npspec/plasmon.hpp"

#include "npspec/error.hpp"
#include "npspec/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace npspec {

namespace {

constexpr double kInvFourPi = 1.0 / (4.0 * 3.14159265358979323846);

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double panel_distance(const PanelMesh& mesh, std::size_t p, const Vec3& z) {
  const auto& t = mesh.triangles[p];
  const double flat = (z - closest_on_triangle(z, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])).norm();
  return std::min(flat, (z - mesh.centroids[p]).norm());
}

void check_point(const PanelMesh& mesh, const Vec3& z, std::size_t k, const FieldOptions& options) {
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    if ((z - mesh.centroids[p]).norm() > options.min_distance + 2.0 * mesh.diameters[p]) continue;
    const double d = panel_distance(mesh, p, z);
    if (!(d > options.min_distance) || d == 0.0) {
      std::ostringstream msg;
      msg << "evaluation point " << k << " (" << z.x() << ", " << z.y() << ", " << z.z()
          << ") is within " << options.min_distance << " of panel " << p;
      throw ConfigError(msg.str());
    }
  }
}

bool is_near(const PanelMesh& mesh, std::size_t p, const Vec3& z, double factor) {
  return (z - mesh.centroids[p]).norm() < factor * mesh.diameters[p];
}

} // namespace

Eigen::MatrixXd potential_operator(const PanelMesh& mesh, std::span<const Vec3> points,
                                   const FieldOptions& options) {
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.size());
  const QuadratureRule rule = triangle_rule(5);
  Eigen::MatrixXd E(m, n);
  parallel_rows(m, options.threads, [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index k = begin; k < end; ++k) {
      const Vec3& z = points[static_cast<std::size_t>(k)];
      check_point(mesh, z, static_cast<std::size_t>(k), options);
      for (Eigen::Index p = 0; p < n; ++p) {
        const auto pp = static_cast<std::size_t>(p);
        if (is_near(mesh, pp, z, options.near_field_factor)) {
          E(k, p) = integrate_panel(mesh, pp, z, rule, options.near_field_factor, options.max_subdivision,
                                    [&](const SurfacePoint& y) { return gamma(z, y.x); });
        } else {
          E(k, p) = kInvFourPi * mesh.areas[pp] / (z - mesh.centroids[pp]).norm();
        }
      }
    }
  });
  return E;
}

std::array<Eigen::MatrixXd, 3> gradient_operator(const PanelMesh& mesh, std::span<const Vec3> points,
                                                 const FieldOptions& options) {
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.size());
  const QuadratureRule rule = triangle_rule(5);
  std::array<Eigen::MatrixXd, 3> G{Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, n)};
  parallel_rows(m, options.threads, [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index k = begin; k < end; ++k) {
      const Vec3& z = points[static_cast<std::size_t>(k)];
      check_point(mesh, z, static_cast<std::size_t>(k), options);
      for (Eigen::Index p = 0; p < n; ++p) {
        const auto pp = static_cast<std::size_t>(p);
        if (is_near(mesh, pp, z, options.near_field_factor)) {
          for (int c = 0; c < 3; ++c)
            G[c](k, p) = integrate_panel(mesh, pp, z, rule, options.near_field_factor, options.max_subdivision,
                                         [&](const SurfacePoint& y) { return grad_gamma(z, y.x)(c); });
        } else {
          const Vec3 g = grad_gamma(z, mesh.centroids[pp]) * mesh.areas[pp];
          for (int c = 0; c < 3; ++c) G[c](k, p) = g(c);
        }
      }
    }
  });
  return G;
}

Eigen::VectorXd evaluate_plasmon(const PanelMesh& mesh, const Eigen::VectorXd& density,
                                 std::span<const Vec3> points, const FieldOptions& options) {
  if (density.size() != static_cast<Eigen::Index>(mesh.size())) throw ConfigError("density size mismatch");
  return potential_operator(mesh, points, options) * density;
}

std::vector<Vec3> evaluate_plasmon_gradient(const PanelMesh& mesh, const Eigen::VectorXd& density,
                                            std::span<const Vec3> points, const FieldOptions& options) {
  if (density.size() != static_cast<Eigen::Index>(mesh.size())) throw ConfigError("density size mismatch");
  const auto G = gradient_operator(mesh, points, options);
  std::vector<Vec3> out(points.size());
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd comp = G[c] * density;
    for (std::size_t k = 0; k < points.size(); ++k) out[k](c) = comp(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::vector<double> region_l2_norms(const PanelMesh& mesh, const Spectrum& spectrum,
                                    const CrossSectionRegion& region, std::span<const Eigen::Index> columns,
                                    const FieldOptions& options) {
  Eigen::MatrixXd V(spectrum.vectors.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] < 0 || columns[c] >= spectrum.size()) throw ConfigError("eigen index out of range");
    V.col(static_cast<Eigen::Index>(c)) = spectrum.vectors.col(columns[c]);
  }
  if (options.azimuths < 1) throw ConfigError("azimuths must be >= 1");
  std::vector<double> acc(columns.size(), 0.0);
  std::vector<double> sq(region.points.size());
  std::vector<Vec3> rotated(region.points.size());
  for (int a = 0; a < options.azimuths; ++a) {
    const double phi = 2.0 * ParametricSurface::kPi * a / options.azimuths;
    const double c = std::cos(phi), s = std::sin(phi);
    for (std::size_t k = 0; k < rotated.size(); ++k) {
      const Vec3& q = region.points[k];
      rotated[k] = Vec3(c * q.x() - s * q.y(), s * q.x() + c * q.y(), q.z());
    }
    const Eigen::MatrixXd U = potential_operator(mesh, rotated, options) * V;
    for (Eigen::Index col = 0; col < U.cols(); ++col) {
      for (Eigen::Index k = 0; k < U.rows(); ++k) sq[static_cast<std::size_t>(k)] = U(k, col) * U(k, col);
      acc[static_cast<std::size_t>(col)] += region.cell_area * pairwise_sum(sq);
    }
  }
  std::vector<double> norms(columns.size());
  for (std::size_t col = 0; col < norms.size(); ++col) norms[col] = std::sqrt(acc[col] / options.azimuths);
  return norms;
}

ExpansionResidual kernel_expansion_residual(const PanelMesh& mesh, const OperatorPair& ops,
                                            const Spectrum& spectrum, const Vec3& z, std::size_t panel,
                                            Eigen::Index last, const FieldOptions& options) {
  if (last < 0 || last >= spectrum.size()) throw ConfigError("expansion truncation out of range");
  if (panel >= mesh.size()) throw ConfigError("panel index out of range");
  const std::array<Vec3, 1> pts{z};
  const Eigen::RowVectorXd g = potential_operator(mesh, pts, options).row(0);
  const Eigen::Index count = last + 1;
  const Eigen::RowVectorXd uz = g * spectrum.vectors.leftCols(count);
  const auto i = static_cast<Eigen::Index>(panel);
  const Eigen::RowVectorXd ux = ops.single_layer.row(i) * spectrum.vectors.leftCols(count) / ops.weights(i);
  std::vector<double> terms(static_cast<std::size_t>(count));
  for (Eigen::Index j = 0; j < count; ++j) terms[static_cast<std::size_t>(j)] = uz(j) * ux(j);
  const double exact = gamma(mesh.centroids[panel], z);
  ExpansionResidual r;
  r.absolute = std::abs(exact - pairwise_sum(terms));
  r.relative = r.absolute / exact;
  return r;
}

ParsevalSums parseval_partial_sums(const PanelMesh& mesh, const OperatorPair& ops, const Spectrum& spectrum,
                                   const Vec3& z, const FieldOptions& options) {
  const std::array<Vec3, 1> pts{z};
  const Eigen::VectorXd g = potential_operator(mesh, pts, options).row(0).transpose();
  const Eigen::VectorXd uz = spectrum.vectors.transpose() * g;
  ParsevalSums out;
  double s = 0.0;
  for (Eigen::Index j = 1; j < uz.size(); ++j) {
    s += uz(j) * uz(j);
    out.partial.push_back(s);
  }
  out.bound = g.dot(ops.single_layer.llt().solve(g));
  return out;
}

LineFit decay_fit(std::span<const double> js, std::span<const double> norms, std::span<const char> keep) {
  if (js.size() != norms.size() || keep.size() != norms.size()) throw ConfigError("decay_fit: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < js.size(); ++i) {
    if (!keep[i]) continue;
    if (!(js[i] > 0.0) || !(norms[i] > 0.0)) throw ConfigError("decay_fit: needs positive j and norms");
    x.push_back(std::log(js[i]));
    y.push_back(std::log(norms[i]));
  }
  if (x.size() < 30) throw ConfigError("decay_fit: fewer than 30 points in the window");
  return fit_line(x, y);
}

std::vector<std::size_t> detect_outliers(std::span<const double> log_norms, const OutlierOptions& options) {
  const std::size_t n = log_norms.size();
  if (n < 50) throw ConfigError("detect_outliers needs at least 50 norms");
  if (options.window < 3 || options.window % 2 == 0) throw ConfigError("outlier window must be odd and >= 3");
  const std::size_t w = static_cast<std::size_t>(options.window);
  const std::size_t half = w / 2;
  std::vector<std::size_t> flagged;
  for (std::size_t i = half; i + half < n; ++i) {
    std::vector<double> win(log_norms.begin() + static_cast<std::ptrdiff_t>(i - half),
                            log_norms.begin() + static_cast<std::ptrdiff_t>(i + half + 1));
    const double med = median(win);
    for (double& v : win) v = std::abs(v - med);
    const double mad = median(win);
    const double excess = log_norms[i] - med;
    if (excess > options.k * mad && excess > 1e-12) flagged.push_back(i);
  }
  return flagged;
}

double axisymmetry_score(const PanelMesh& mesh, const Eigen::VectorXd& density) {
  if (!mesh.has_rings()) throw ConfigError("axisymmetry_score needs a structured mesh with rotation rings");
  if (density.size() != static_cast<Eigen::Index>(mesh.size())) throw ConfigError("density size mismatch");
  const int rings = *std::max_element(mesh.ring.begin(), mesh.ring.end()) + 1;
  std::vector<double> ring_area(rings, 0.0), ring_sum(rings, 0.0);
  double area = 0.0, sum = 0.0;
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    const double a = mesh.areas[p], v = density(static_cast<Eigen::Index>(p));
    ring_area[mesh.ring[p]] += a;
    ring_sum[mesh.ring[p]] += a * v;
    area += a;
    sum += a * v;
  }
  const double mean = sum / area;
  double total = 0.0, within = 0.0;
  for (std::size_t p = 0; p < mesh.size(); ++p) {
    const double a = mesh.areas[p], v = density(static_cast<Eigen::Index>(p));
    const double ring_mean = ring_sum[mesh.ring[p]] / ring_area[mesh.ring[p]];
    total += a * (v - mean) * (v - mean);
    within += a * (v - ring_mean) * (v - ring_mean);
  }
  if (total <= 1e-30 * area * std::max(1.0, mean * mean)) return 1.0;
  return std::clamp(1.0 - within / total, 0.0, 1.0);
}

DecayReport decay_report(const PanelMesh& mesh, const Spectrum& spectrum, const CrossSectionRegion& region,
                         std::size_t j_max, const OutlierOptions& outlier_options, const FieldOptions& options) {
  const std::vector<Eigen::Index> positive = spectrum.positive_order();
  if (positive.size() < 2) throw ConfigError("spectrum has no positive eigenvalues beyond 1/2");
  const std::size_t count = std::min(j_max, positive.size() - 1);
  // Half a window of extra indices gives the last reported j a centered window.
  const std::size_t context = std::min(count + static_cast<std::size_t>(outlier_options.window / 2), positive.size() - 1);
  std::vector<Eigen::Index> columns(positive.begin() + 1, positive.begin() + 1 + static_cast<std::ptrdiff_t>(context));
  const std::vector<double> all_norms = region_l2_norms(mesh, spectrum, region, columns, options);
  const std::vector<double> norms(all_norms.begin(), all_norms.begin() + static_cast<std::ptrdiff_t>(count));

  DecayReport rep;
  std::vector<double> logs(count), js(count);
  for (std::size_t i = 0; i < count; ++i) {
    DecayRow row;
    row.j = static_cast<long>(i + 1);
    row.column = columns[i];
    row.lambda = spectrum.values(columns[i]);
    row.norm = norms[i];
    row.log_norm = std::log(norms[i]);
    row.axisymmetry = mesh.has_rings() ? axisymmetry_score(mesh, spectrum.vectors.col(columns[i])) : 0.0;
    logs[i] = row.log_norm;
    js[i] = static_cast<double>(row.j);
    rep.rows.push_back(row);
  }
  if (context >= 50) {
    std::vector<double> all_logs(context);
    for (std::size_t i = 0; i < context; ++i) all_logs[i] = std::log(all_norms[i]);
    for (std::size_t i : detect_outliers(all_logs, outlier_options))
      if (i < count) rep.outliers.push_back(i);
  }
  std::vector<char> keep(count, 1), out(count, 0);
  for (std::size_t i : rep.outliers) {
    rep.rows[i].outlier = true;
    keep[i] = 0;
    out[i] = 1;
  }
  if (count >= 30) rep.fit = decay_fit(js, norms, keep);
  if (rep.outliers.size() >= 2) {
    std::vector<double> x, y;
    for (std::size_t i : rep.outliers) {
      x.push_back(std::log(js[i]));
      y.push_back(logs[i]);
    }
    rep.outlier_fit = fit_line(x, y);
  }
  rep.deltas = {1e-3, 1e-2, 1e-1, 1.0};
  for (double d : rep.deltas) {
    rep.as_fraction_s0.push_back(almost_sure_fraction(norms, d, 0.0, count));
    rep.as_fraction_s_half.push_back(almost_sure_fraction(norms, d, 0.5, count));
  }
  return rep;
}

void write_norms_csv(std::ostream& os, const DecayReport& report) {
  os << "j,lambda,norm,log_norm,outlier,axisymmetry\n";
  char buf[192];
  for (const DecayRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%d,%.17g\n", r.j, r.lambda, r.norm, r.log_norm,
                  r.outlier ? 1 : 0, r.axisymmetry);
    os << buf;
  }
}

void write_field_csv(std::ostream& os, std::span<const Vec3> points, const Eigen::VectorXd& values) {
  os << "x,z,value\n";
  char buf[96];
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", points[k].x(), points[k].z(),
                  values(static_cast<Eigen::Index>(k)));
    os << buf;
  }
}

} // namespace npspec
