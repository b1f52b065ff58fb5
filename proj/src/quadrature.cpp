#include "npspec/quadrature.hpp"

#include "npspec/error.hpp"

#include <cmath>
#include <string>

namespace npspec {

void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigError("Gauss-Legendre order must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = 0.5 * (1.0 - x);
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = weights[n - 1 - i] = 0.5 * w;
  }
}

QuadratureRule gauss_product_rule(int n) {
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  QuadratureRule rule;
  rule.degree = 2 * n - 2;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // (s, t) in the unit square -> (s, t (1 - s)), Jacobian 1 - s.
      rule.nodes.emplace_back(x[i], x[j] * (1.0 - x[i]));
      rule.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
    }
  return rule;
}

QuadratureRule triangle_rule(int degree) {
  QuadratureRule rule;
  rule.degree = degree;
  switch (degree) {
  case 1:
    rule.nodes = {{1.0 / 3.0, 1.0 / 3.0}};
    rule.weights = {0.5};
    return rule;
  case 2:
    rule.nodes = {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}};
    rule.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    return rule;
  case 5: {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, a2 = (6.0 + s15) / 21.0;
    const double w1 = (155.0 - s15) / 2400.0, w2 = (155.0 + s15) / 2400.0;
    rule.nodes = {{1.0 / 3.0, 1.0 / 3.0},
                  {a1, a1}, {1.0 - 2.0 * a1, a1}, {a1, 1.0 - 2.0 * a1},
                  {a2, a2}, {1.0 - 2.0 * a2, a2}, {a2, 1.0 - 2.0 * a2}};
    rule.weights = {9.0 / 80.0, w1, w1, w1, w2, w2, w2};
    return rule;
  }
  default:
    if (degree < 1) throw ConfigError("quadrature degree must be positive, got " + std::to_string(degree));
    rule = gauss_product_rule((degree + 3) / 2);
    return rule;
  }
}

} // namespace npspec
