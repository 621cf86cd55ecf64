#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mbsr/grid_io.hpp"
#include "test_util.hpp"

using namespace mbsr;

namespace {

EmissionGrid make_grid(Map2D values, const std::string& compound = "isoprene") {
  return EmissionGrid{compound, "2020-06-01", 0.25, 0.25, std::move(values)};
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("csv payload is read row-major with header metadata") {
  testutil::TempDir dir("grid_csv_read");
  write_text(dir / "g.csv",
             "compound=isoprene\ndate=2020-06-01\nrows=2\ncols=2\nlat_res=0.25,lon_res=0.5\n0,1e-12\n2e-11,0\n");
  const auto g = load_grid(dir / "g.csv");
  CHECK(g.compound == "isoprene");
  CHECK(g.date == "2020-06-01");
  CHECK(g.lon_res == 0.5);
  CHECK(g.values(0, 1) == 1e-12);
  CHECK(g.values(1, 0) == 2e-11);
  CHECK(max_value(g.values) == 2e-11);
}

TEST_CASE("negative value is rejected with its cell index") {
  testutil::TempDir dir("grid_csv_negative");
  write_text(dir / "g.csv",
             "compound=x\ndate=2020-06-01\nrows=2\ncols=2\nlat_res=0.25\nlon_res=0.25\n0,0\n0,-1.0\n");
  try {
    load_grid(dir / "g.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("col 1") != std::string::npos);
  }
}

TEST_CASE("malformed headers and payload shape mismatches are errors") {
  testutil::TempDir dir("grid_csv_bad");
  write_text(dir / "a.csv", "compound=x\ndate=2020-06-01\nrows=1\nlat_res=0.25\nlon_res=0.25\n0\n");
  CHECK_THROWS_AS(load_grid(dir / "a.csv"), Error);  // missing cols
  write_text(dir / "b.csv", "compound=x\ndate=2020-06-01\nrows=2\ncols=2\nlat_res=0.25\nlon_res=0.25\n0,0\n");
  CHECK_THROWS_WITH_AS(load_grid(dir / "b.csv"), doctest::Contains("dimension mismatch"), Error);
  write_text(dir / "c.csv", "compound=x\ndate=2020-06-01\nrows=1\ncols=2\nlat_res=0.25\nlon_res=0.25\n0,0,0\n");
  CHECK_THROWS_WITH_AS(load_grid(dir / "c.csv"), doctest::Contains("dimension mismatch"), Error);
  write_text(dir / "d.csv", "compound=x\ndate=June\nrows=1\ncols=1\nlat_res=0.25\nlon_res=0.25\n0\n");
  CHECK_THROWS_AS(load_grid(dir / "d.csv"), Error);
  write_text(dir / "e.csv", "compound=x\ndate=2020-06-01\nrows=1\ncols=1\nlat_res=0.25\nlon_res=0.25\nnan\n");
  CHECK_THROWS_AS(load_grid(dir / "e.csv"), Error);
  CHECK_THROWS_AS(load_grid(dir / "missing.bgrid"), Error);
}

TEST_CASE("bgrid round trip is bitwise over random grids") {
  testutil::TempDir dir("grid_bgrid_roundtrip");
  SplitMix64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto rows = 1 + rng.bounded(40), cols = 1 + rng.bounded(40);
    Map2D v(rows, cols);
    for (double& x : v.flat()) x = rng.uniform() < 0.3 ? 0.0 : std::pow(10.0, rng.uniform(-30.0, -9.0));
    const auto g = make_grid(std::move(v), "c" + std::to_string(i));
    save_grid(g, dir / "g.bgrid");
    const auto back = load_grid(dir / "g.bgrid");
    REQUIRE(back == g);
  }
}

TEST_CASE("full-size bgrid round trip") {
  testutil::TempDir dir("grid_bgrid_big");
  const auto g = make_grid(testutil::random_map(720, 1440, 5, 0.0, 1e-9));
  save_grid(g, dir / "big.bgrid");
  CHECK(load_grid(dir / "big.bgrid") == g);
}

TEST_CASE("csv keeps 17 significant digits") {
  testutil::TempDir dir("grid_csv_precision");
  Map2D v(2, 3);
  v(0, 0) = 1e-30;
  v(0, 1) = 1.0 / 3.0 * 1e-10;
  v(1, 2) = 2.718281828459045e-12;
  const auto g = make_grid(v);
  save_grid(g, dir / "g.csv");
  CHECK(load_grid(dir / "g.csv") == g);

  save_grid(make_grid(Map2D(4, 4)), dir / "z.csv");
  const auto z = load_grid(dir / "z.csv");
  CHECK(z.values.size() == 16);
  CHECK(max_value(z.values) == 0.0);
}

TEST_CASE("bgrid layout and corruption checks") {
  testutil::TempDir dir("grid_bgrid_layout");
  const auto g = make_grid(Map2D(2, 3, 1e-12), "ab");
  save_grid(g, dir / "g.bgrid");
  // magic 4 + version 1 + len 4 + tag 2 + date 10 + dims 8 + res 16 + payload 48
  CHECK(std::filesystem::file_size(dir / "g.bgrid") == 4 + 1 + 4 + 2 + 10 + 8 + 16 + 48);
  std::ifstream in(dir / "g.bgrid", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "BGRD");

  std::ofstream(dir / "g.bgrid", std::ios::app | std::ios::binary) << 'x';
  CHECK_THROWS_WITH_AS(load_grid(dir / "g.bgrid"), doctest::Contains("dimension mismatch"), Error);
  write_text(dir / "bad.bgrid", "NOPE");
  CHECK_THROWS_AS(load_grid(dir / "bad.bgrid"), Error);
}

TEST_CASE("validation rules") {
  auto g = make_grid(Map2D(1, 1));
  CHECK_NOTHROW(g.validate());
  g.values(0, 0) = INFINITY;
  CHECK_THROWS_AS(g.validate(), Error);
  g.values(0, 0) = 0.0;
  g.lat_res = 0.0;
  CHECK_THROWS_AS(g.validate(), Error);
  CHECK(is_iso_date("2021-12-31"));
  CHECK_FALSE(is_iso_date("2021-13-01"));
  CHECK_FALSE(is_iso_date("21-01-01"));
  CHECK(grid_format_for("a/b.bgrid") == GridFormat::bgrid);
  CHECK(parse_grid_format("csv") == GridFormat::csv);
  CHECK_THROWS_AS(grid_format_for("a.nc"), Error);
}
