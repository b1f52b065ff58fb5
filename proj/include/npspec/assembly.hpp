#pragma once

#include "npspec/mesh.hpp"
#include "npspec/quadrature.hpp"

#include <Eigen/Core>

#include <functional>

namespace npspec {

struct AssemblyOptions {
  int quadrature_degree = 5;
  /// Panels whose centroid lies within this many diameters of the target
  /// point are integrated on a 4-fold subdivision (applied recursively).
  double near_field_factor = 2.0;
  int max_subdivision = 3;
  int threads = 1;
};

struct AssemblyDiagnostics {
  /// max |WC - (WC)^T| / max |WC| before symmetrization of the single layer.
  double single_layer_asymmetry = 0;
  /// Diagonal entries of the double layer whose row-sum fix exceeded 1/2.
  int large_diagonal_count = 0;
  double max_abs_diagonal = 0;
};

/// Discrete layer operators on a panel mesh with piecewise constant densities
/// collocated at centroids.
///
/// single_layer is the symmetric H* Gram matrix: entry (i, j) approximates
/// a_i * int_{P_j} Gamma(c_i - y) dS_y with a_i the panel area, so
/// phi^T S psi is the discrete <phi, S[psi]>. The potential at the centroids is
/// W^{-1} S phi. np_adjoint is K* = W^{-1} D^T W for the double layer D.
struct OperatorPair {
  Eigen::MatrixXd single_layer;
  Eigen::MatrixXd np_adjoint;
  Eigen::VectorXd weights;
  AssemblyDiagnostics diagnostics;

  Eigen::Index size() const { return weights.size(); }
  Eigen::VectorXd surface_potential(const Eigen::VectorXd& density) const;
};

/// Integrate f(y) dS_y over panel p with the rule, subdividing into four
/// while the target lies within near_factor * diameter of the sub-panel.
double integrate_panel(const PanelMesh& mesh, std::size_t p, const Vec3& target, const QuadratureRule& rule,
                       double near_factor, int max_depth, const std::function<double(const SurfacePoint&)>& f);

/// int_{P_p} Gamma(c_p - y) dS_y for the panel's own collocation point.
/// Flat panels use the closed form; curved panels a Duffy-regularized
/// Gauss product over the three sub-triangles meeting at the collocation point.
double self_potential(const PanelMesh& mesh, std::size_t p, int gauss_points = 10);

/// Collocation matrix C(i, j) = int_{P_j} Gamma(c_i - y) dS_y.
Eigen::MatrixXd assemble_potential_matrix(const PanelMesh& mesh, const AssemblyOptions& options = {});

/// Double layer D(i, j) = int_{P_j} K(c_i, y) dS_y with diagonal fixed so every
/// row sums to 1/2.
Eigen::MatrixXd assemble_double_layer(const PanelMesh& mesh, const AssemblyOptions& options = {},
                                      AssemblyDiagnostics* diagnostics = nullptr);

Eigen::MatrixXd assemble_single_layer(const PanelMesh& mesh, const AssemblyOptions& options = {},
                                      AssemblyDiagnostics* diagnostics = nullptr);

Eigen::MatrixXd assemble_np_adjoint(const PanelMesh& mesh, const AssemblyOptions& options = {},
                                    AssemblyDiagnostics* diagnostics = nullptr);

OperatorPair assemble_operators(const PanelMesh& mesh, const AssemblyOptions& options = {});

/// ||S K - (S K)^T||_F / ||S K||_F, the discrete defect of S K* = K S.
double calderon_residual(const Eigen::MatrixXd& single_layer, const Eigen::MatrixXd& np_adjoint);

/// Run body(begin, end) over contiguous blocks of [0, n) on up to `threads`
/// threads. Blocks write disjoint storage, so results do not depend on the
/// thread count.
void parallel_rows(Eigen::Index n, int threads, const std::function<void(Eigen::Index, Eigen::Index)>& body);

} // namespace npspec
