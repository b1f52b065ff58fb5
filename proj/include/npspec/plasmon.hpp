#pragma once

#include "npspec/assembly.hpp"
#include "npspec/mesh.hpp"
#include "npspec/region.hpp"
#include "npspec/spectrum.hpp"
#include "npspec/stats.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <array>
#include <span>
#include <vector>

namespace npspec {

struct FieldOptions {
  /// Points closer than this to any panel are rejected.
  double min_distance = 0.0;
  double near_field_factor = 2.0;
  int max_subdivision = 3;
  int threads = 1;
  /// Number of copies of the cross-section, rotated about the z axis, whose
  /// squared norms are averaged. 1 means the literal cross-section only.
  int azimuths = 1;
};

/// Linear map from panel densities to single layer potentials at the points:
/// u = E phi, E(k, p) ~ int_{P_p} Gamma(z_k - y) dS_y (panel midpoint rule,
/// subdivided near z_k).
Eigen::MatrixXd potential_operator(const PanelMesh& mesh, std::span<const Vec3> points,
                                   const FieldOptions& options = {});

/// Gradient analogue of potential_operator, one matrix per Cartesian component.
std::array<Eigen::MatrixXd, 3> gradient_operator(const PanelMesh& mesh, std::span<const Vec3> points,
                                                 const FieldOptions& options = {});

Eigen::VectorXd evaluate_plasmon(const PanelMesh& mesh, const Eigen::VectorXd& density,
                                 std::span<const Vec3> points, const FieldOptions& options = {});

std::vector<Vec3> evaluate_plasmon_gradient(const PanelMesh& mesh, const Eigen::VectorXd& density,
                                            std::span<const Vec3> points, const FieldOptions& options = {});

/// Midpoint-rule L2(region) norms of u_j for the given spectrum columns.
std::vector<double> region_l2_norms(const PanelMesh& mesh, const Spectrum& spectrum,
                                    const CrossSectionRegion& region, std::span<const Eigen::Index> columns,
                                    const FieldOptions& options = {});

struct ExpansionResidual {
  double absolute = 0;
  double relative = 0;
};

/// |Gamma(x - z) - sum_{j=0}^{last} u_j(z) u_j(x)| at the collocation point x of
/// `panel`, with u_j on the surface taken as W^-1 S v_j.
ExpansionResidual kernel_expansion_residual(const PanelMesh& mesh, const OperatorPair& ops,
                                            const Spectrum& spectrum, const Vec3& z, std::size_t panel,
                                            Eigen::Index last, const FieldOptions& options = {});

struct ParsevalSums {
  std::vector<double> partial; // partial[J-1] = sum_{j=1}^{J} u_j(z)^2
  double bound = 0;            // ||Gamma(z - .)||_H^2 = sum_{j>=0} u_j(z)^2
};

ParsevalSums parseval_partial_sums(const PanelMesh& mesh, const OperatorPair& ops, const Spectrum& spectrum,
                                   const Vec3& z, const FieldOptions& options = {});

/// Least squares fit of log(norm) against log(j) over entries with
/// keep[i] set. Needs at least 30 such points.
LineFit decay_fit(std::span<const double> js, std::span<const double> norms, std::span<const char> keep);

struct OutlierOptions {
  int window = 21;
  double k = 5.0;
};

/// Positions i where log_norms[i] exceeds the median of the centered window
/// by more than k times the window's median absolute deviation. The first
/// and last window/2 positions have no centered window and are never flagged.
std::vector<std::size_t> detect_outliers(std::span<const double> log_norms, const OutlierOptions& options = {});

/// 1 - (within-ring variance) / (total variance), area weighted. Requires a
/// mesh with rotation rings.
double axisymmetry_score(const PanelMesh& mesh, const Eigen::VectorXd& density);

struct DecayRow {
  long j = 0;
  Eigen::Index column = 0;
  double lambda = 0;
  double norm = 0;
  double log_norm = 0;
  bool outlier = false;
  double axisymmetry = 0;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  LineFit fit;                 // non-outliers
  LineFit outlier_fit;         // outliers, if at least two
  std::vector<std::size_t> outliers; // positions into rows
  std::vector<double> deltas;
  std::vector<double> as_fraction_s0;
  std::vector<double> as_fraction_s_half;
};

/// Region norms for the first j_max positive eigenvalues after the 1/2
/// eigenvalue (j = 1..j_max in decreasing order), with outliers, fit,
/// axisymmetry scores and almost-sure fractions.
DecayReport decay_report(const PanelMesh& mesh, const Spectrum& spectrum, const CrossSectionRegion& region,
                         std::size_t j_max, const OutlierOptions& outlier_options = {},
                         const FieldOptions& options = {});

/// CSV "j,lambda,norm,log_norm,outlier,axisymmetry".
void write_norms_csv(std::ostream& os, const DecayReport& report);

/// CSV "x,z,value".
void write_field_csv(std::ostream& os, std::span<const Vec3> points, const Eigen::VectorXd& values);

} // namespace npspec
