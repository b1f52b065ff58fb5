#pragma once

#include "npspec/assembly.hpp"
#include "npspec/mesh.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace npspec {

/// NP eigenvalues sorted by descending |lambda| (ties: descending signed value,
/// then solver order) with H*-orthonormal densities, V^T S V = I.
struct Spectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors; // column j is the density of eigenvalue j
  /// ||SK - (SK)^T||_F / ||SK||_F of the product that was symmetrized.
  double antisymmetric_defect = 0;
  double min_cholesky_pivot = 0;

  Eigen::Index size() const { return values.size(); }
  /// Indices of positive eigenvalues in decreasing order; the 1/2 eigenvalue
  /// comes first.
  std::vector<Eigen::Index> positive_order() const;
  /// Indices of negative eigenvalues by descending |lambda|.
  std::vector<Eigen::Index> negative_order() const;
  /// Number of negative eigenvalues with |lambda| > threshold.
  int count_negative(double threshold) const;
};

/// Solve sym(S K*) v = lambda S v through the Cholesky factor of S and a dense
/// symmetric eigensolver.
Spectrum solve_spectrum(const Eigen::MatrixXd& single_layer, const Eigen::MatrixXd& np_adjoint);

/// Index window [first_index, end_fraction * count) of a descending sequence.
/// The default keeps the part of the spectrum a desk-scale mesh resolves.
/// Smallest and largest eigenvalue of a symmetric matrix (values only).
std::pair<double, double> symmetric_eigen_range(const Eigen::MatrixXd& m);

struct WeylWindow {
  std::size_t first_index = 10;
  double end_fraction = 0.1;
};

struct WeylFit {
  double estimate = 0;          // median of |lambda|_j sqrt(j), all eigenvalues by descending |lambda|
  double positive_estimate = 0; // same statistic over the positive eigenvalues only
  double theoretical = 0; // sqrt((3W - 2 pi chi) / (128 pi))
  double willmore = 0;
  int euler = 0;
  std::size_t window_begin = 0, window_end = 0;
  double relative_deviation = 0;
};

double weyl_constant(double willmore, int euler_characteristic);

/// Weyl estimate from eigenvalue magnitudes listed in decreasing order; the
/// entry at position j carries index j (the 1/2 eigenvalue has index 0).
double weyl_estimate(std::span<const double> descending, const WeylWindow& window,
                     std::size_t* begin = nullptr, std::size_t* end = nullptr);

WeylFit weyl_fit(const Spectrum& spectrum, const ParametricSurface& surface, const PanelMesh& mesh,
                 const WeylWindow& window = {});

/// #{1 <= j <= N : |a_j| > delta j^-s} / N with a_j = values[j - 1].
double almost_sure_fraction(std::span<const double> values, double delta, double s, std::size_t count);

/// CSV "index,lambda,is_negative" for the given ordering of eigenvalue
/// positions; `labels` gives the printed index of each row.
void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum, std::span<const Eigen::Index> order,
                        std::span<const long> labels);

} // namespace npspec
