#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mbsr/dataset.hpp"
#include "mbsr/synthetic.hpp"
#include "test_util.hpp"

using namespace mbsr;

namespace {

// Textbook SplitMix64 and Fisher-Yates, written independently of rng.hpp.
struct Sm64 {
  std::uint64_t s;
  std::uint64_t operator()() {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

std::vector<std::int64_t> oracle_permutation(std::vector<std::int64_t> ids, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  Sm64 g{seed};
  for (std::size_t i = ids.size() - 1; i >= 1; --i) {
    const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(g()) * (i + 1)) >> 64);
    std::swap(ids[i], ids[j]);
  }
  return ids;
}

ArchiveSet small_archives(const std::vector<std::string>& compounds) {
  std::vector<EmissionGrid> grids;
  std::uint64_t seed = 1;
  for (const auto& c : compounds)
    for (const char* d : {"2020-01-01", "2020-01-02"})
      grids.push_back({c, d, 0.25, 0.25, testutil::random_map(128, 192, seed++, 0.0, 1e-9)});
  const auto built = build_archives(grids);
  return ArchiveSet(built.begin(), built.end());
}

}  // namespace

TEST_CASE("generator matches the published SplitMix64 sequence") {
  SplitMix64 r(1234567);
  CHECK(r.next() == 6457827717110365317ull);
  CHECK(r.next() == 3203168211198807973ull);
  CHECK(r.next() == 9817491932198370423ull);
  SplitMix64 z(0);
  CHECK(z.next() == 0xE220A8397B1DCDAFull);
}

TEST_CASE("split sizes use floor arithmetic") {
  const SplitSpec spec;
  CHECK(split_sizes(10, spec) == SplitSizes{7, 2, 1});
  CHECK(split_sizes(81957, spec) == SplitSizes{57369, 16391, 8197});
  CHECK(split_sizes(92, spec) == SplitSizes{64, 18, 10});
  SplitSpec bad;
  bad.test = 0.2;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("split is the documented seeded permutation and a partition") {
  std::vector<std::int64_t> ids;
  for (std::int64_t i = 0; i < 503; ++i) ids.push_back(1000 - 2 * i);  // unsorted on purpose
  SplitSpec spec;
  spec.seed = 42;
  const auto parts = split_ids(ids, spec);
  const auto perm = oracle_permutation(ids, 42);
  std::vector<std::int64_t> got;
  for (const auto* list : {&parts.train, &parts.val, &parts.test})
    for (auto p : *list) got.push_back(ids[p]);
  CHECK(got == perm);
  CHECK(parts.train.size() == 352);
  CHECK(parts.val.size() == 100);
  CHECK(parts.test.size() == 51);

  std::set<std::size_t> all;
  for (const auto* list : {&parts.train, &parts.val, &parts.test}) all.insert(list->begin(), list->end());
  CHECK(all.size() == ids.size());
  CHECK(split_ids(ids, spec) == parts);
  spec.seed = 43;
  CHECK_FALSE(split_ids(ids, spec) == parts);
  CHECK_THROWS_AS(split_ids({1, 2, 3}, spec), Error);
}

TEST_CASE("batch iterator covers each epoch exactly once") {
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  BatchIterator it(idx, 4, 5);
  std::multiset<std::size_t> seen;
  std::vector<std::size_t> sizes;
  while (it.epoch() == 0) {
    const auto b = it.next();
    sizes.push_back(b.size());
    seen.insert(b.begin(), b.end());
  }
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
  CHECK(seen == std::multiset<std::size_t>(idx.begin(), idx.end()));

  BatchIterator a(idx, 3, 9), b(idx, 3, 9);
  for (int i = 0; i < 12; ++i) CHECK(a.next() == b.next());
  CHECK_THROWS_AS(BatchIterator({}, 2, 0), Error);
  CHECK_THROWS_AS(BatchIterator(idx, 0, 0), Error);
}

TEST_CASE("assembly stacks transformed channels with the reference first") {
  const auto archives = small_archives({"ref", "a", "b"});
  const auto ids = archives.at("ref").ids();
  REQUIRE(ids.size() == 12);
  const auto tf = fit_transforms(archives, {"ref", "a", "b"}, ids, 100);

  const auto sisr = assemble_misr(archives, "ref", {}, tf);
  REQUIRE(sisr.size() == 12);
  CHECK(sisr[0].channels() == 1);
  CHECK(sisr[0].input.size() == 256);

  const auto ab = assemble_misr(archives, "ref", {"a", "b"}, tf);
  const auto ba = assemble_misr(archives, "ref", {"b", "a"}, tf);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    CHECK(ab[i].patch_id == ids[i]);
    CHECK(ab[i].compounds == std::vector<std::string>{"ref", "a", "b"});
    CHECK(ab[i].target.size() == 4096);
    CHECK(std::equal(ab[i].input.begin(), ab[i].input.begin() + 256, sisr[i].input.begin()));
    CHECK(std::equal(ab[i].input.begin() + 256, ab[i].input.begin() + 512, ba[i].input.begin() + 512));
    CHECK(std::equal(ab[i].input.begin() + 512, ab[i].input.end(), ba[i].input.begin() + 256));
    for (double v : ab[i].input) REQUIRE((v >= 0.0 && v <= 1.0));
    // channel 0 inverts back to the reference LR patch
    const auto& lr = archives.at("ref").at(ab[i].patch_id).lr;
    for (std::size_t k = 0; k < 256; ++k) {
      const double x = lr.data()[k];
      if (x <= tf.at("ref").knots().front() || x >= tf.at("ref").knots().back()) continue;
      REQUIRE(std::fabs(tf.at("ref").invert(ab[i].input[k]) - x) <= 1e-9 * x);
    }
  }
}

TEST_CASE("missing aligned patch names id and compound") {
  auto archives = small_archives({"ref", "a", "b"});
  archives.at("b").patches.erase(7);
  const auto ids = archives.at("ref").ids();
  const auto tf = fit_transforms(archives, {"ref", "a"}, ids, 50);
  TransformSet all = tf;
  all.emplace("b", tf.at("a"));
  CHECK_THROWS_WITH_AS(assemble_misr(archives, "ref", {"a", "b"}, all), "missing aligned patch (7, b)", Error);
  CHECK_THROWS_AS(assemble_misr(archives, "ref", {"a", "a"}, all), Error);
  TransformSet partial{{"ref", tf.at("ref")}};
  CHECK_THROWS_AS(assemble_misr(archives, "ref", {"a"}, partial), Error);
}

TEST_CASE("three synthetic compounds over the full grid give 242 samples") {
  SynthSpec spec;
  spec.rows = 720;
  spec.cols = 1440;
  spec.correlation_length = 8;
  spec.compounds = {{"ref", 1.0, 0.3, 2.0, 1, false}, {"a", 0.5, 0.3, 2.0, 2, false}, {"b", 0.0, 0.3, 2.0, 3, false}};
  const auto built = build_archives(gen_compound_set(spec).grids);
  const ArchiveSet archives(built.begin(), built.end());
  const auto ids = archives.at("ref").ids();
  const auto tf = fit_transforms(archives, {"ref", "a", "b"}, ids, 1000);
  const auto samples = assemble_misr(archives, "ref", {"a", "b"}, tf);
  CHECK(samples.size() == 242);
  CHECK(samples[100].input.size() == 3 * 256);
  CHECK(samples[100].target.size() == 4096);
}

TEST_CASE("dataset manifest round trip") {
  testutil::TempDir dir("dataset_manifest");
  DatasetManifest m{"iso", {"a", "b"}, {{"iso", "00ff"}, {"a", "0001"}}, 7, {3, 1}, {2}, {0}};
  save_manifest(m, dir / "dataset.json");
  const auto back = load_manifest(dir / "dataset.json");
  CHECK(back.reference == "iso");
  CHECK(back.joined == m.joined);
  CHECK(back.transform_fingerprints == m.transform_fingerprints);
  CHECK(back.split_seed == 7);
  CHECK(back.train_ids == m.train_ids);
  CHECK(back.test_ids == m.test_ids);
}
