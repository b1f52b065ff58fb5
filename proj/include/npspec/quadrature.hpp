#pragma once

#include <Eigen/Core>

#include <vector>

namespace npspec {

/// Quadrature on the reference triangle (0,0), (1,0), (0,1). Weights sum to
/// the reference area 1/2.
struct QuadratureRule {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return nodes.size(); }
};

/// Symmetric rules for degree 1 (centroid), 2 (three points) and 5 (the
/// seven point Radon rule); any other degree falls back to a collapsed
/// Gauss-Legendre product rule exact to at least that degree.
QuadratureRule triangle_rule(int degree);

/// Collapsed (Duffy) Gauss-Legendre product with n points per direction,
/// exact for polynomials of total degree 2n - 2.
QuadratureRule gauss_product_rule(int n);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace npspec
