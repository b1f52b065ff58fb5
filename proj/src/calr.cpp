#include "npspec/calr.hpp"

#include "npspec/error.hpp"
#include "npspec/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace npspec {

CalrCoefficients calr_coefficients(const PanelMesh& mesh, const Spectrum& spectrum, const Vec3& z, const Vec3& a,
                                   const FieldOptions& options) {
  if (std::abs(a.norm() - 1.0) > 1e-12) throw ConfigError("dipole direction must be a unit vector");
  if (spectrum.size() < 2) throw ConfigError("spectrum too small for a CALR series");
  const std::array<Vec3, 1> pts{z};
  const auto G = gradient_operator(mesh, pts, options);
  const Eigen::RowVectorXd row = a.x() * G[0].row(0) + a.y() * G[1].row(0) + a.z() * G[2].row(0);
  const Eigen::RowVectorXd coeff = row * spectrum.vectors;
  CalrCoefficients out;
  for (Eigen::Index j = 1; j < spectrum.size(); ++j) {
    out.lambda.push_back(spectrum.values(j));
    out.c.push_back(coeff(j));
  }
  return out;
}

Energy energy_series(std::span<const double> lambda, std::span<const double> c, double delta) {
  if (lambda.size() != c.size()) throw ConfigError("energy_series: size mismatch");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive");
  std::vector<double> terms(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) terms[j] = c[j] * c[j] / (delta * delta + lambda[j] * lambda[j]);
  Energy e;
  e.G = pairwise_sum(terms);
  e.E = delta * e.G;
  return e;
}

namespace {

// Fits c_j^2 ~ A j^{-p} over the upper half of the index range and bounds
// sum_{j>J} c_j^2 by the integral of the fitted law. Returns +inf when the
// fitted law is not summable.
double tail_sum(std::span<const double> c, double* exponent) {
  const std::size_t J = c.size();
  std::vector<double> x, y;
  for (std::size_t j = J / 2; j < J; ++j) {
    if (c[j] == 0.0) continue;
    x.push_back(std::log(static_cast<double>(j + 1)));
    y.push_back(std::log(c[j] * c[j]));
  }
  if (x.size() < 8) {
    *exponent = 0;
    return std::numeric_limits<double>::infinity();
  }
  const LineFit fit = fit_line(x, y);
  const double p = -fit.slope;
  *exponent = p;
  if (!(p > 1.0)) return std::numeric_limits<double>::infinity();
  const double Jd = static_cast<double>(J);
  return std::exp(fit.intercept) * std::pow(Jd, 1.0 - p) / (p - 1.0);
}

} // namespace

CalrResult sweep_and_classify(std::span<const double> lambda, std::span<const double> c, const CalrOptions& options) {
  if (lambda.size() != c.size() || lambda.empty()) throw ConfigError("sweep: empty or mismatched series");
  if (options.points_per_decade < 2) throw ConfigError("points_per_decade must be >= 2");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double l : lambda) {
    lo = std::min(lo, std::abs(l));
    hi = std::max(hi, std::abs(l));
  }
  if (!(lo > 0.0)) throw ConfigError("sweep: zero eigenvalue in the series");
  CalrResult r;
  double dmin = options.delta_min > 0 ? options.delta_min : lo;
  double dmax = options.delta_max > 0 ? options.delta_max : hi;
  if (dmax < lo) throw ConfigError("delta range lies entirely below the smallest computed |lambda|");
  if (dmin < lo) {
    dmin = lo;
    r.clamped = true;
  }
  if (dmax > hi) {
    dmax = hi;
    r.clamped = true;
  }
  if (!(dmax > dmin)) throw ConfigError("delta range is empty after clamping");
  r.clamp_floor = lo;
  r.clamp_ceiling = hi;

  const double decades = std::log10(dmax / dmin);
  const int n = std::max(2, static_cast<int>(std::ceil(decades * options.points_per_decade)) + 1);
  r.delta.resize(n);
  r.G.resize(n);
  r.E.resize(n);
  for (int i = 0; i < n; ++i) r.delta[i] = dmin * std::pow(dmax / dmin, static_cast<double>(i) / (n - 1));
  parallel_rows(n, options.threads, [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index i = b; i < e; ++i) {
      const Energy en = energy_series(lambda, c, r.delta[i]);
      r.G[i] = en.G;
      r.E[i] = en.E;
    }
  });

  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    if (!(r.E[i] > 0.0)) throw NumericalError("CALR energy vanished; all coefficients are zero");
    x[i] = std::log(r.delta[i]);
    y[i] = std::log(r.E[i]);
  }
  const LineFit fit = fit_line(x, y);
  r.slope = fit.slope;
  r.intercept = fit.intercept;

  const double tail = tail_sum(c, &r.tail_exponent);
  r.tail_fraction = tail / (r.delta.front() * r.delta.front()) / r.G.front();

  if (!(r.tail_fraction <= options.tail_limit))
    r.verdict = "withheld";
  else if (r.slope >= 1.0 - options.tol)
    r.verdict = "bounded-energy";
  else if (r.slope <= options.tol)
    r.verdict = "resonance-indicated";
  else
    r.verdict = "inconclusive";
  return r;
}

void write_sweep_csv(std::ostream& os, const CalrResult& result) {
  os << "delta,G,E\n";
  char buf[96];
  for (std::size_t i = 0; i < result.delta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", result.delta[i], result.G[i], result.E[i]);
    os << buf;
  }
}

void write_verdict_json(std::ostream& os, const CalrResult& result) {
  nlohmann::ordered_json j;
  j["slope"] = result.slope;
  j["clamp_floor"] = result.clamp_floor;
  j["clamp_ceiling"] = result.clamp_ceiling;
  j["clamped"] = result.clamped;
  j["tail_exponent"] = std::isfinite(result.tail_exponent) ? nlohmann::ordered_json(result.tail_exponent) : nullptr;
  j["tail_fraction"] = std::isfinite(result.tail_fraction) ? nlohmann::ordered_json(result.tail_fraction) : nullptr;
  j["verdict"] = result.verdict;
  os << j.dump(2) << "\n";
}

} // namespace npspec
