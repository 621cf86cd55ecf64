#include <doctest.h>

#include <cmath>
#include <optional>

#include "mbsr/interconnection.hpp"
#include "mbsr/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mbsr;

namespace {

double mean_of(const Map2D& m) {
  double s = 0;
  for (double v : m.flat()) s += v;
  return s / double(m.size());
}

// Horizontal lag autocorrelation with wraparound.
double autocorr(const Map2D& m, std::size_t lag) {
  const double mu = mean_of(m);
  double num = 0, den = 0;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double a = m(r, c) - mu, b = m(r, (c + lag) % m.cols()) - mu;
      num += a * b;
      den += a * a;
    }
  return num / den;
}

SynthSpec spec_of(std::size_t n, std::vector<SynthCompound> cs, std::uint64_t shared = 0) {
  SynthSpec s;
  s.rows = s.cols = n;
  s.shared_seed = shared;
  s.compounds = std::move(cs);
  return s;
}

}  // namespace

TEST_CASE("random fields are seeded, standardized and smooth") {
  const auto a = gen_field(5, 128, 128, 4.0);
  CHECK(a == gen_field(5, 128, 128, 4.0));
  CHECK_FALSE(a == gen_field(6, 128, 128, 4.0));
  CHECK(std::fabs(mean_of(a)) <= 0.05);
  double var = 0;
  for (double v : a.flat()) var += v * v;
  CHECK(var / double(a.size()) == doctest::Approx(1.0).epsilon(1e-9));
  for (double cl : {2.0, 4.0, 6.0}) {
    const auto f = gen_field(9, 256, 256, cl);
    CHECK(autocorr(f, std::size_t(cl)) > autocorr(f, std::size_t(4 * cl)));
  }
  CHECK_THROWS_AS(gen_field(1, 4, 64, 2.0), Error);
}

TEST_CASE("gaussian blur is periodic and mass preserving") {
  const auto m = testutil::random_map(32, 40, 3, -1.0, 1.0);
  const auto b = gaussian_blur(m, 2.0);
  CHECK(mean_of(b) == doctest::Approx(mean_of(m)).epsilon(1e-12));
  const auto c = gaussian_blur(Map2D(16, 16, 2.5), 3.0);
  for (double v : c.flat()) REQUIRE(v == doctest::Approx(2.5).epsilon(1e-14));
  // shifting the input shifts the output (wraparound)
  Map2D shifted(32, 40);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t col = 0; col < 40; ++col) shifted(r, (col + 3) % 40) = m(r, col);
  const auto bs = gaussian_blur(shifted, 2.0);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t col = 0; col < 40; ++col) REQUIRE(bs(r, (col + 3) % 40) == doctest::Approx(b(r, col)).epsilon(1e-12));
}

TEST_CASE("standardize") {
  const auto s = standardize(testutil::random_map(10, 10, 1, 3.0, 9.0));
  CHECK(std::fabs(mean_of(s)) < 1e-12);
  CHECK(standardize(Map2D(3, 3, 4.0)) == Map2D(3, 3, 0.0));
}

TEST_CASE("latent correlation follows the mixing weights") {
  const auto same = gen_compound_set(spec_of(64, {{"a", 1.0, 0.2, 1.0, 1}, {"b", 1.0, 0.2, 1.0, 2}}));
  CHECK(same.latents.at("a")[0] == same.latents.at("b")[0]);
  CHECK(same.grids[0].values == same.grids[1].values);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto set = gen_compound_set(
        spec_of(256, {{"one", 1.0, 0.0, 1.0, 10 + seed}, {"half", 0.5, 0.0, 1.0, 20 + seed}, {"zero", 0.0, 0.0, 1.0, 30 + seed}},
                seed));
    const auto& L = set.latents;
    const double p_zero = testutil::oracle_pcc(L.at("one")[0], L.at("zero")[0]);
    const double p_half = testutil::oracle_pcc(L.at("one")[0], L.at("half")[0]);
    const double p_one = testutil::oracle_pcc(L.at("one")[0], L.at("one")[0]);
    CHECK(std::fabs(p_zero) <= 0.1);
    CHECK(p_zero <= p_half);
    CHECK(p_half <= p_one);
  }
}

TEST_CASE("emissions are sparse, finite and inside the physical range") {
  const auto set = gen_compound_set(spec_of(256, {{"s", 1.0, 0.9, 3.0, 1}, {"d", 0.3, 0.0, 40.0, 2}}));
  std::size_t zeros = 0;
  for (double v : set.grids[0].values.flat()) zeros += v == 0.0;
  CHECK(zeros >= std::size_t(0.89 * 65536));
  CHECK(zeros <= std::size_t(0.91 * 65536));
  for (const auto& g : set.grids) {
    CHECK(max_value(g.values) == kEmissionMax);
    for (double v : g.values.flat()) REQUIRE((v == 0.0 || (v >= kEmissionMin && v <= kEmissionMax)));
    CHECK_NOTHROW(g.validate());
  }
  // a large gamma drives the low end onto the floor
  std::size_t floored = 0;
  for (double v : set.grids[1].values.flat()) floored += v == kEmissionMin;
  CHECK(floored > 0);
}

TEST_CASE("complementary auxiliaries carry the reference's high-frequency residual") {
  auto spec = spec_of(256, {{"ref", 1.0, 0.0, 1.0, 1}, {"aux", 1.0, 0.0, 1.0, 2, true}});
  spec.correlation_length = 2.0;
  spec.hf_scale = 3.0;
  const auto set = gen_compound_set(spec);
  const auto& ref = set.latents.at("ref")[0];
  const auto smooth = gaussian_blur(ref, 3.0);
  Map2D hf(256, 256);
  for (std::size_t i = 0; i < hf.size(); ++i) hf.data()[i] = ref.data()[i] - smooth.data()[i];
  const auto expect = standardize(hf);
  const auto& aux = set.latents.at("aux")[0];
  for (std::size_t i = 0; i < aux.size(); ++i) REQUIRE(aux.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("multiple dates draw fresh fields; grid sets round-trip through disk") {
  auto spec = spec_of(32, {{"iso", 0.8, 0.3, 2.0, 1}, {"mt", 0.5, 0.1, 2.0, 2}});
  spec.dates = {"2019-06-01", "2019-07-01"};
  const auto set = gen_compound_set(spec);
  REQUIRE(set.grids.size() == 4);
  CHECK(set.grids[0].compound == "iso");
  CHECK(set.grids[1].date == "2019-07-01");
  CHECK_FALSE(set.grids[0].values == set.grids[1].values);
  CHECK(gen_compound_set(spec).grids == set.grids);

  testutil::TempDir dir("synth_set");
  write_grid_set(set.grids, dir.path());
  CHECK(std::filesystem::exists(dir / "manifest.csv"));
  const auto back = load_grid_set(dir.path());
  REQUIRE(back.size() == 4);
  for (const auto& g : set.grids) {
    bool found = false;
    for (const auto& b : back) found |= (b == g);
    CHECK(found);
  }
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(gen_compound_set(spec_of(64, {})), Error);
  CHECK_THROWS_AS(gen_compound_set(spec_of(64, {{"a", 1.5, 0.0, 1.0, 1}})), Error);
  CHECK_THROWS_AS(gen_compound_set(spec_of(64, {{"a", 1.0, 1.0, 1.0, 1}})), Error);
  CHECK_THROWS_AS(gen_compound_set(spec_of(64, {{"a", 1.0, 0.0, 1.0, 1}, {"a", 1.0, 0.0, 1.0, 2}})), Error);
  CHECK_THROWS_AS(gen_compound_set(spec_of(4, {{"a", 1.0, 0.0, 1.0, 1}})), Error);
}
