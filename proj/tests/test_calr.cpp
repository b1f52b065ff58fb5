#include <doctest.h>

#include "npspec/calr.hpp"
#include "npspec/error.hpp"

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace npspec;
using fixtures::sphere_1k;

namespace {

struct Series {
  std::vector<double> lambda, c;
};

Series synthetic(std::size_t J, double c_power) {
  Series s;
  for (std::size_t j = 1; j <= J; ++j) {
    s.lambda.push_back(0.25 / std::sqrt(static_cast<double>(j)));
    s.c.push_back(std::pow(static_cast<double>(j), -c_power));
  }
  return s;
}

double naive(const std::vector<double>& lambda, const std::vector<double>& c, const std::vector<std::size_t>& order,
             double delta) {
  long double g = 0;
  for (std::size_t j : order) g += static_cast<long double>(c[j]) * c[j] / (delta * delta + lambda[j] * lambda[j]);
  return static_cast<double>(g);
}

} // namespace

TEST_CASE("single-term energy") {
  const std::vector<double> l{0.1}, c{1.0};
  const Energy e = energy_series(l, c, 0.1);
  CHECK(e.G == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(e.E == doctest::Approx(5.0).epsilon(1e-14));
  CHECK_THROWS_AS(energy_series(l, c, 0.0), ConfigError);
  CHECK_THROWS_AS(energy_series(l, std::vector<double>{1, 2}, 0.1), ConfigError);
}

TEST_CASE("large delta limit") {
  const Series s = synthetic(500, 1.0);
  double sum = 0;
  for (double x : s.c) sum += x * x;
  const double d = 1e6;
  CHECK(energy_series(s.lambda, s.c, d).G * d * d == doctest::Approx(sum).epsilon(1e-9));
  CHECK(energy_series(s.lambda, s.c, d).G < 1e-11);
}

TEST_CASE("energy series is independent of summation order") {
  const auto& f = sphere_1k();
  const Vec3 z(0.3, 0.2, 1.9);
  const CalrCoefficients co = calr_coefficients(f.mesh, f.spectrum, z, Vec3(1, 2, -1).normalized());
  std::vector<std::size_t> order(co.c.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> reversed(order.rbegin(), order.rend()), shuffled = order;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(17));
  for (double d : {1e-3, 1e-2, 0.1, 1.0}) {
    const double g = energy_series(co.lambda, co.c, d).G;
    CHECK(std::abs(g - naive(co.lambda, co.c, reversed, d)) <= 1e-12 * g);
    CHECK(std::abs(g - naive(co.lambda, co.c, shuffled, d)) <= 1e-12 * g);
  }
}

TEST_CASE("energy is monotone in delta and even in the dipole direction") {
  const auto& f = sphere_1k();
  const Vec3 z(0.3, 0.2, 1.9), a = Vec3(1, 2, -1).normalized();
  const CalrCoefficients plus = calr_coefficients(f.mesh, f.spectrum, z, a);
  const CalrCoefficients minus = calr_coefficients(f.mesh, f.spectrum, z, -a);
  double prev = std::numeric_limits<double>::infinity();
  for (double d = 1e-3; d < 1.0; d *= 1.5) {
    const double g = energy_series(plus.lambda, plus.c, d).G;
    CHECK(g < prev);
    prev = g;
    CHECK(energy_series(minus.lambda, minus.c, d).G == doctest::Approx(g).epsilon(1e-14));
  }
  CHECK_THROWS_AS(calr_coefficients(f.mesh, f.spectrum, z, Vec3(1, 1, 0)), ConfigError);
  CHECK_THROWS_AS(calr_coefficients(f.mesh, f.spectrum, f.mesh.centroids[0], a), ConfigError);
}

TEST_CASE("convex-like synthetic series is bounded") {
  const Series s = synthetic(1000000, 5.0);
  const CalrResult r = sweep_and_classify(s.lambda, s.c);
  CHECK(r.slope > 0.9);
  CHECK(r.slope < 1.0);
  CHECK(r.tail_fraction < 1e-6);
  CHECK(r.verdict == "bounded-energy");
  CHECK(r.clamp_floor == doctest::Approx(0.25 / 1000.0));
  CHECK(r.delta.size() == r.G.size());
  for (std::size_t i = 1; i < r.G.size(); ++i) CHECK(r.G[i] < r.G[i - 1]);
}

TEST_CASE("resonant synthetic series is distinguished") {
  const Series s = synthetic(2000, 0.0);
  const CalrResult r = sweep_and_classify(s.lambda, s.c);
  CHECK(r.slope < 0.5);
  CHECK(r.E.front() > r.E.back()); // E grows as delta decreases
  // A flat coefficient law has no summable tail: the verdict is withheld.
  CHECK(std::isinf(r.tail_fraction));
  CHECK(r.verdict == "withheld");
}

TEST_CASE("sweep range is clamped to the computed spectrum") {
  const Series s = synthetic(400, 3.0);
  CalrOptions o;
  o.delta_min = 1e-6;
  o.delta_max = 10.0;
  const CalrResult r = sweep_and_classify(s.lambda, s.c, o);
  CHECK(r.clamped);
  CHECK(r.delta.front() == doctest::Approx(s.lambda.back()));
  CHECK(r.delta.back() == doctest::Approx(s.lambda.front()));
  const double decades = std::log10(r.delta.back() / r.delta.front());
  CHECK(static_cast<double>(r.delta.size()) >= 40 * decades);

  CalrOptions below;
  below.delta_min = 1e-6;
  below.delta_max = 1e-5;
  CHECK_THROWS_AS(sweep_and_classify(s.lambda, s.c, below), ConfigError);
}

TEST_CASE("sweep outputs") {
  const Series s = synthetic(400, 3.0);
  const CalrResult r = sweep_and_classify(s.lambda, s.c);
  std::ostringstream csv, js;
  write_sweep_csv(csv, r);
  write_verdict_json(js, r);
  CHECK(csv.str().rfind("delta,G,E\n", 0) == 0);
  for (const char* key : {"\"slope\"", "\"clamp_floor\"", "\"tail_fraction\"", "\"verdict\""})
    CHECK(js.str().find(key) != std::string::npos);
}
