#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mbsr/transform.hpp"
#include "test_util.hpp"

using namespace mbsr;

namespace {

std::vector<double> log_uniform(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = std::pow(10.0, rng.uniform(-30.0, -9.0));
  return v;
}

// Sort-and-index quantile, written out independently of the library.
double oracle_quantile(std::vector<double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

TEST_CASE("uniform integers give integer knots") {
  std::vector<double> s(101);
  for (int i = 0; i <= 100; ++i) s[static_cast<std::size_t>(i)] = i;
  const auto t = fit_quantile_transform(s, 101, "x");
  for (std::size_t k = 0; k < 101; ++k) CHECK(t.knots()[k] == static_cast<double>(k));
  CHECK(t.apply(50.0) == 0.5);
  CHECK(t.apply(0.0) == 0.0);
  CHECK(t.apply(100.0) == 1.0);
  CHECK(t.apply(-3.0) == 0.0);
  CHECK(t.apply(1e9) == 1.0);
  CHECK(t.invert(0.0) == 0.0);
  CHECK(t.invert(1.0) == 100.0);
}

TEST_CASE("constant data gives identical knots") {
  const auto t = fit_quantile_transform(std::vector<double>(50, 5.0), 10, "x");
  for (double k : t.knots()) CHECK(k == 5.0);
  CHECK(t.invert(0.3) == 5.0);
}

TEST_CASE("knots match a brute-force quantile oracle") {
  const auto s = log_uniform(100'000, 3);
  const auto t = fit_quantile_transform(s, 1000, "iso");
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  CHECK(t.knots().front() == sorted.front());
  CHECK(t.knots().back() == sorted.back());
  for (std::size_t k = 0; k < 1000; ++k) {
    const double want = oracle_quantile(sorted, static_cast<double>(k) / 999.0);
    REQUIRE(std::fabs(t.knots()[k] - want) <= 1e-12 * want);
  }
}

TEST_CASE("zero mass maps to the midpoint of its probability interval") {
  std::vector<double> s(1000, 0.0);
  SplitMix64 rng(9);
  for (std::size_t i = 900; i < 1000; ++i) s[i] = rng.uniform(1e-12, 1e-10);
  const auto t = fit_quantile_transform(s, 1001, "iso");
  // Knots 0..899 are zero, so the run spans probabilities [0, 0.899]. The
  // count-based mass interval [0, 0.9] is only resolved to one knot spacing.
  const auto& k = t.knots();
  const auto run = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), 0.0) - k.begin());
  CHECK(run == 900);
  CHECK(t.apply(0.0) == doctest::Approx(0.5 * (run - 1) / 1000.0).epsilon(1e-12));
  CHECK(std::fabs(t.apply(0.0) - 0.45) <= 1.0 / 1000.0);
  CHECK(t.invert(0.45) == 0.0);
  CHECK(t.invert(0.2) == 0.0);
}

TEST_CASE("round trip on untied samples") {
  const auto fit = log_uniform(50'000, 4);
  const auto t = fit_quantile_transform(fit, 1000, "iso");
  const auto xs = log_uniform(10'000, 5);
  for (double x : xs) {
    if (x <= t.knots().front() || x >= t.knots().back()) continue;
    const double back = t.invert(t.apply(x));
    REQUIRE(std::fabs(back - x) <= 1e-9 * x);
  }
}

TEST_CASE("apply and invert are monotone") {
  std::vector<double> s = log_uniform(5000, 6);
  s.insert(s.end(), 3000, 0.0);
  const auto t = fit_quantile_transform(s, 200, "iso");
  auto sorted = log_uniform(3000, 7);
  sorted.push_back(0.0);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(t.apply(sorted[i]) >= t.apply(sorted[i - 1]));
  double prev = t.invert(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = t.invert(i / 1000.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("fresh samples become uniform") {
  const auto t = fit_quantile_transform(log_uniform(100'000, 8), 1000, "iso");
  auto u = t.apply(log_uniform(100'000, 9));
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    ks = std::max({ks, std::fabs((i + 1) / n - u[i]), std::fabs(u[i] - i / n)});
  CHECK(ks <= 0.02);
}

TEST_CASE("inverse clamps out-of-range inputs and counts them") {
  const auto t = fit_quantile_transform(std::vector<double>{1.0, 2.0, 3.0}, 3, "x");
  std::size_t clamped = 0;
  CHECK(t.invert(-0.5, &clamped) == 1.0);
  CHECK(t.invert(1.5, &clamped) == 3.0);
  CHECK(t.invert(0.5, &clamped) == 2.0);
  CHECK(clamped == 2);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(fit_quantile_transform(std::vector<double>{}, 10, "x"), Error);
  CHECK_THROWS_AS(fit_quantile_transform(std::vector<double>{1.0}, 10, "x"), Error);
  CHECK_THROWS_AS(fit_quantile_transform(std::vector<double>{1.0, NAN}, 10, "x"), Error);
  const auto t = fit_quantile_transform(std::vector<double>{1.0, 2.0}, 2, "x");
  CHECK_THROWS_AS(t.apply(INFINITY), Error);
  QuantileTransform unfitted;
  CHECK_THROWS_AS(unfitted.invert(0.5), Error);
}

TEST_CASE("reservoir subsampling is deterministic and bounded") {
  const auto s = log_uniform(20'000, 10);
  const auto a = fit_quantile_transform(s, 100, "iso", 5000, 1);
  const auto b = fit_quantile_transform(s, 100, "iso", 5000, 1);
  CHECK(a == b);
  CHECK(a.knots().front() >= *std::min_element(s.begin(), s.end()));
  CHECK(a.fitted_on() == fit_quantile_transform(s, 100, "iso").fitted_on());
}

TEST_CASE("binary and json persistence") {
  testutil::TempDir dir("transform_io");
  const auto t = fit_quantile_transform(log_uniform(1000, 11), 64, "isoprene");
  save_transform(t, dir / "t.qtf");
  CHECK(load_transform(dir / "t.qtf") == t);
  save_transform_json(t, dir / "t.json");
  CHECK(std::filesystem::file_size(dir / "t.json") > 0);
  CHECK_THROWS_AS(load_transform(dir / "t.json"), Error);
}
