#pragma once

#include "npspec/mesh.hpp"
#include "npspec/plasmon.hpp"
#include "npspec/spectrum.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace npspec {

/// Dipole coefficients c_j = a . grad u_j(z) for every eigenvalue except the
/// leading 1/2, in descending |lambda| order.
struct CalrCoefficients {
  std::vector<double> lambda;
  std::vector<double> c;
};

CalrCoefficients calr_coefficients(const PanelMesh& mesh, const Spectrum& spectrum, const Vec3& z, const Vec3& a,
                                   const FieldOptions& options = {});

struct Energy {
  double G = 0;
  double E = 0;
};

/// G = sum c_j^2 / (delta^2 + lambda_j^2), E = delta * G.
Energy energy_series(std::span<const double> lambda, std::span<const double> c, double delta);

struct CalrOptions {
  /// 0 selects the clamp value (|lambda_J| resp. |lambda_1|).
  double delta_min = 0;
  double delta_max = 0;
  int points_per_decade = 40;
  double tol = 0.1;
  /// Verdict is withheld when the estimated truncation tail exceeds this
  /// fraction of G at the smallest delta.
  double tail_limit = 0.1;
  int threads = 1;
};

struct CalrResult {
  std::vector<double> delta, G, E;
  double slope = 0;
  double intercept = 0;
  double clamp_floor = 0;
  double clamp_ceiling = 0;
  bool clamped = false;
  double tail_exponent = 0;
  double tail_fraction = 0;
  std::string verdict;
};

CalrResult sweep_and_classify(std::span<const double> lambda, std::span<const double> c,
                              const CalrOptions& options = {});

void write_sweep_csv(std::ostream& os, const CalrResult& result);
void write_verdict_json(std::ostream& os, const CalrResult& result);

} // namespace npspec
