#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mbsr/interconnection.hpp"
#include "mbsr/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mbsr;
using testutil::oracle_pcc;
using testutil::oracle_ssim;

namespace {

EmissionGrid grid_of(const std::string& c, const std::string& d, Map2D v) {
  return EmissionGrid{c, d, 0.25, 0.25, std::move(v)};
}

}  // namespace

TEST_CASE("pcc identities and hand computation") {
  const auto a = testutil::random_map(8, 9, 1);
  Map2D neg(a.rows(), a.cols()), affine(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    neg.data()[i] = -a.data()[i];
    affine.data()[i] = 3.5 * a.data()[i] + 2.0;
  }
  CHECK(*pcc(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*pcc(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  const auto b = testutil::random_map(8, 9, 2);
  CHECK(std::fabs(*pcc(affine, b) - *pcc(a, b)) <= 1e-12);

  const Map2D x(3, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 10});
  const Map2D y(3, 3, std::vector<double>{2, 1, 4, 3, 7, 5, 9, 8, 6});
  CHECK(std::fabs(*pcc(x, y) - oracle_pcc(x, y)) <= 1e-12);
  CHECK_FALSE(pcc(Map2D(3, 3, 1.0), y).has_value());
}

TEST_CASE("ssim matches the per-window oracle") {
  Map2D board(16, 16), inverse(16, 16);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) {
      board(i, j) = (i + j) % 2;
      inverse(i, j) = 1.0 - board(i, j);
    }
  CHECK(std::fabs(ssim(board, inverse) - oracle_ssim(board, inverse, 1.0)) <= 1e-10);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = testutil::random_map(20 + s, 30 - s, 10 + s);
    const auto b = testutil::random_map(20 + s, 30 - s, 50 + s);
    CHECK(std::fabs(ssim(a, b) - oracle_ssim(a, b, 1.0)) <= 1e-10);
    CHECK(ssim(a, b) < 1.0);
  }
}

TEST_CASE("ssim identity, shift penalty and errors") {
  const auto a = testutil::random_map(24, 24, 3);
  CHECK(ssim(a, a) == 1.0);
  Map2D shifted(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) shifted.data()[i] = a.data()[i] + 1.0;
  CHECK(ssim(a, shifted) < 1.0);
  CHECK_THROWS_AS(ssim(Map2D(10, 10), Map2D(10, 10)), Error);
  CHECK_THROWS_AS(ssim(a, Map2D(24, 23)), Error);
  const auto w = gaussian_window(11, 1.5);
  double sum = 0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(w[10]));
}

TEST_CASE("matrix over shared dates is symmetric with unit diagonal") {
  std::vector<EmissionGrid> maps;
  for (const char* d : {"2020-01-01", "2020-02-01"}) {
    maps.push_back(grid_of("iso", d, testutil::random_map(32, 32, d[6])));
    maps.push_back(grid_of("copy", d, maps.back().values));
    maps.push_back(grid_of("other", d, testutil::random_map(32, 32, 7 + d[6])));
  }
  maps.push_back(grid_of("lonely", "2021-01-01", testutil::random_map(32, 32, 9)));
  const auto m = build_matrix(maps);
  REQUIRE(m.compounds == std::vector<std::string>{"copy", "iso", "lonely", "other"});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(m.ssim(i, i) == 1.0);
    CHECK(m.pcc(i, i) == 1.0);
    for (std::size_t j = 0; j < 4; ++j) {
      if (std::isnan(m.ssim(i, j))) CHECK(std::isnan(m.ssim(j, i)));
      else CHECK(m.ssim(i, j) == m.ssim(j, i));
      if (!std::isnan(m.pcc(i, j))) CHECK(m.pcc(i, j) == m.pcc(j, i));
    }
  }
  const auto iso = m.index_of("iso"), copy = m.index_of("copy"), lonely = m.index_of("lonely");
  CHECK(m.ssim(iso, copy) == 1.0);
  CHECK(m.pcc(iso, copy) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.n_pairs(iso, copy) == 2);
  CHECK(m.n_pairs(iso, lonely) == 0);
  CHECK(std::isnan(m.ssim(iso, lonely)));

  const auto single = build_matrix({maps[0]});
  CHECK(single.size() == 1);
  CHECK(single.ssim(0, 0) == 1.0);
}

TEST_CASE("mixing order of synthetic compounds is recovered") {
  SynthSpec spec;
  spec.rows = spec.cols = 128;
  spec.shared_seed = 3;
  spec.compounds = {{"ref", 1.0, 0.0, 1.0, 1, false},
                    {"near", 0.9, 0.0, 1.0, 2, false},
                    {"far", 0.0, 0.0, 1.0, 3, false}};
  const auto m = build_matrix(gen_compound_set(spec).grids);
  const auto r = m.index_of("ref");
  CHECK(m.pcc(r, m.index_of("near")) > m.pcc(r, m.index_of("far")));
  CHECK(m.ssim(r, m.index_of("near")) > m.ssim(r, m.index_of("far")));
  CHECK(rank_compounds(m, "ref", 2, RankMode::most) == std::vector<std::string>{"near", "far"});
}

TEST_CASE("ranking follows the reference row with lexical tie breaks") {
  InterconnectionMatrix m;
  m.compounds = {"a", "b", "c", "d", "ref"};
  m.ssim = Map2D(5, 5, 1.0);
  m.pcc = Map2D(5, 5, 1.0);
  m.n_pairs = Array2D<int>(5, 5, 1);
  const double row[] = {0.3, 0.9, 0.3, 0.1};
  for (std::size_t j = 0; j < 4; ++j) m.ssim(4, j) = m.ssim(j, 4) = row[j];

  CHECK(rank_compounds(m, "ref", 4, RankMode::most) == std::vector<std::string>{"b", "a", "c", "d"});
  CHECK(rank_compounds(m, "ref", 4, RankMode::least) == std::vector<std::string>{"d", "a", "c", "b"});
  CHECK(rank_compounds(m, "ref", 2, RankMode::least) == std::vector<std::string>{"d", "a"});
  CHECK_THROWS_AS(rank_compounds(m, "zzz", 1, RankMode::most), Error);
  CHECK_THROWS_AS(rank_compounds(m, "ref", 5, RankMode::most), Error);
  CHECK_THROWS_AS(parse_rank_mode("best"), Error);

  // permuting the compound order of the matrix does not change the ranking
  InterconnectionMatrix p;
  p.compounds = {"ref", "d", "c", "b", "a"};
  p.ssim = Map2D(5, 5, 1.0);
  p.pcc = p.ssim;
  p.n_pairs = m.n_pairs;
  for (std::size_t j = 1; j < 5; ++j) p.ssim(0, j) = p.ssim(j, 0) = m.ssim(4, m.index_of(p.compounds[j]));
  CHECK(rank_compounds(p, "ref", 4, RankMode::most) == rank_compounds(m, "ref", 4, RankMode::most));
}

TEST_CASE("matrix csv export") {
  std::vector<EmissionGrid> maps{grid_of("a", "2020-01-01", testutil::random_map(16, 16, 1)),
                                 grid_of("b", "2020-01-01", testutil::random_map(16, 16, 1))};
  testutil::TempDir dir("matrix_csv");
  write_matrix_csv(build_matrix(maps), dir.path());
  std::ifstream in(dir / "ssim.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "compound,a,b");
  CHECK(row == "a,1,1");
  CHECK(std::filesystem::exists(dir / "pcc.csv"));
}
