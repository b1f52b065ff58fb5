#include "npspec/spectrum.hpp"

#include "npspec/error.hpp"
#include "npspec/stats.hpp"

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace npspec {

std::vector<Eigen::Index> Spectrum::positive_order() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < values.size(); ++j)
    if (values(j) > 0.0) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  return idx;
}

std::vector<Eigen::Index> Spectrum::negative_order() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < values.size(); ++j)
    if (values(j) < 0.0) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  return idx;
}

int Spectrum::count_negative(double threshold) const {
  int c = 0;
  for (Eigen::Index j = 0; j < values.size(); ++j)
    if (values(j) < 0.0 && -values(j) > threshold) ++c;
  return c;
}

Spectrum solve_spectrum(const Eigen::MatrixXd& single_layer, const Eigen::MatrixXd& np_adjoint) {
  const Eigen::Index n = single_layer.rows();
  if (single_layer.cols() != n || np_adjoint.rows() != n || np_adjoint.cols() != n)
    throw ConfigError("solve_spectrum: dimension mismatch");

  Spectrum spec;
  const Eigen::MatrixXd P = single_layer * np_adjoint;
  spec.antisymmetric_defect = (P - P.transpose()).norm() / P.norm();
  const Eigen::MatrixXd M = 0.5 * (P + P.transpose());

  const Eigen::LLT<Eigen::MatrixXd> llt(single_layer);
  if (llt.info() != Eigen::Success) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(single_layer);
    throw NumericalError("single layer matrix is not positive definite (smallest pivot " +
                         std::to_string(ldlt.vectorD().minCoeff()) + ")");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  spec.min_cholesky_pivot = L.diagonal().minCoeff();
  spec.min_cholesky_pivot *= spec.min_cholesky_pivot;

  // A = L^-1 M L^-T
  Eigen::MatrixXd X = L.triangularView<Eigen::Lower>().solve(M);
  Eigen::MatrixXd A = L.triangularView<Eigen::Lower>().solve(X.transpose());
  A = (0.5 * (A + A.transpose())).eval();

  Eigen::VectorXd w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), A.data(),
                                         static_cast<lapack_int>(n), w.data());
  if (info != 0) throw NumericalError("symmetric eigensolver failed (info " + std::to_string(info) + ")");

  // V = L^-T Y
  const Eigen::MatrixXd V = L.transpose().triangularView<Eigen::Upper>().solve(A);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double da = std::abs(w(a)), db = std::abs(w(b));
    if (da != db) return da > db;
    if (w(a) != w(b)) return w(a) > w(b);
    return a < b;
  });

  spec.values.resize(n);
  spec.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    spec.values(j) = w(order[static_cast<std::size_t>(j)]);
    Eigen::VectorXd v = V.col(order[static_cast<std::size_t>(j)]);
    // Sign convention: the first entry of significant magnitude is positive.
    const double big = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(v(i)) > 1e-3 * big) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    spec.vectors.col(j) = v;
  }
  return spec;
}

std::pair<double, double> symmetric_eigen_range(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ConfigError("symmetric_eigen_range: need a square matrix");
  Eigen::MatrixXd a = m;
  Eigen::VectorXd w(m.rows());
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', static_cast<lapack_int>(m.rows()), a.data(),
                                         static_cast<lapack_int>(m.rows()), w.data());
  if (info != 0) throw NumericalError("symmetric eigensolver failed (info " + std::to_string(info) + ")");
  return {w.minCoeff(), w.maxCoeff()};
}

double weyl_constant(double willmore, int euler_characteristic) {
  constexpr double kPi = 3.14159265358979323846;
  const double arg = (3.0 * willmore - 2.0 * kPi * euler_characteristic) / (128.0 * kPi);
  if (arg < 0.0) throw NumericalError("negative Weyl constant argument");
  return std::sqrt(arg);
}

double weyl_estimate(std::span<const double> descending, const WeylWindow& window, std::size_t* begin,
                     std::size_t* end) {
  if (descending.size() < 100) throw ConfigError("Weyl fit needs at least 100 eigenvalues");
  if (!(window.end_fraction > 0.0 && window.end_fraction <= 1.0) || window.first_index < 1)
    throw ConfigError("Weyl window needs first_index >= 1 and 0 < end_fraction <= 1");
  const std::size_t b = window.first_index;
  const auto e = static_cast<std::size_t>(std::floor(window.end_fraction * static_cast<double>(descending.size())));
  if (e < b + 10) throw ConfigError("Weyl window holds fewer than 10 eigenvalues");
  std::vector<double> products;
  for (std::size_t j = b; j < e; ++j) products.push_back(std::abs(descending[j]) * std::sqrt(static_cast<double>(j)));
  if (begin) *begin = b;
  if (end) *end = e;
  return median(std::move(products));
}

WeylFit weyl_fit(const Spectrum& spectrum, const ParametricSurface& surface, const PanelMesh& mesh,
                 const WeylWindow& window) {
  std::vector<double> all(spectrum.values.data(), spectrum.values.data() + spectrum.values.size());
  std::vector<double> positives;
  for (Eigen::Index j : spectrum.positive_order()) positives.push_back(spectrum.values(j));
  WeylFit fit;
  fit.estimate = weyl_estimate(all, window, &fit.window_begin, &fit.window_end);
  fit.positive_estimate = weyl_estimate(positives, window);
  fit.willmore = willmore_energy(surface, mesh);
  fit.euler = mesh.euler_characteristic();
  fit.theoretical = weyl_constant(fit.willmore, fit.euler);
  fit.relative_deviation = (fit.estimate - fit.theoretical) / fit.theoretical;
  return fit;
}

double almost_sure_fraction(std::span<const double> values, double delta, double s, std::size_t count) {
  if (count == 0 || count > values.size()) throw ConfigError("almost_sure_fraction: N out of range");
  if (!(delta > 0.0) || s < 0.0) throw ConfigError("almost_sure_fraction: need delta > 0 and s >= 0");
  std::size_t hits = 0;
  for (std::size_t j = 1; j <= count; ++j)
    if (std::abs(values[j - 1]) > delta * std::pow(static_cast<double>(j), -s)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(count);
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum, std::span<const Eigen::Index> order,
                        std::span<const long> labels) {
  os << "index,lambda,is_negative\n";
  char buf[96];
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double l = spectrum.values(order[r]);
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%d\n", labels[r], l, l < 0.0 ? 1 : 0);
    os << buf;
  }
}

} // namespace npspec
