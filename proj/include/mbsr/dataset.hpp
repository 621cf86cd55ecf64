#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbsr/patch.hpp"
#include "mbsr/transform.hpp"

namespace mbsr {

/// One training example: C transformed LR channels (channel 0 is the
/// reference compound) and the transformed HR reference target.
struct MisrSample {
  std::int64_t patch_id = 0;
  std::vector<std::string> compounds;
  std::vector<double> input;   // C x 16 x 16
  std::vector<double> target;  // 64 x 64

  std::size_t channels() const { return compounds.size(); }
};

using ArchiveSet = std::map<std::string, PatchArchive>;
using TransformSet = std::map<std::string, QuantileTransform>;

/// Samples for every patch id of the reference archive, in ascending id
/// order. When `ids` is given only those patches are assembled.
std::vector<MisrSample> assemble_misr(const ArchiveSet& archives, const std::string& reference,
                                      const std::vector<std::string>& joined, const TransformSet& transforms,
                                      const std::optional<std::vector<std::int64_t>>& ids = std::nullopt);

struct SplitSpec {
  std::uint64_t seed = 0;
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;
  void validate() const;
};

struct SplitSizes {
  std::size_t train, val, test;
  bool operator==(const SplitSizes&) const = default;
};

/// floor(train N), floor(val N), remainder.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

/// Positions into the id list. Ids are sorted ascending, permuted by a
/// Fisher-Yates shuffle driven by SplitMix64(spec.seed), then cut in order
/// into train / val / test.
struct SplitIndices {
  std::vector<std::size_t> train, val, test;
  bool operator==(const SplitIndices&) const = default;
};

SplitIndices split_ids(const std::vector<std::int64_t>& patch_ids, const SplitSpec& spec);
SplitIndices split_dataset(const std::vector<MisrSample>& samples, const SplitSpec& spec);

/// Deterministic minibatch stream over a fixed index list. Each epoch is a
/// fresh shuffle seeded by epoch_seed + epoch; the last batch of an epoch
/// may be short.
class BatchIterator {
 public:
  BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size, std::uint64_t epoch_seed);

  /// Next batch of indices; starts a new epoch when the current one is spent.
  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }
  /// True when the next call to next() starts a new epoch.
  bool at_epoch_start() const { return cursor_ == 0; }

 private:
  void reshuffle();

  std::vector<std::size_t> base_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

/// Fit one transform per compound on the HR values of the given patch ids.
TransformSet fit_transforms(const ArchiveSet& archives, const std::vector<std::string>& compounds,
                            const std::vector<std::int64_t>& train_ids, std::size_t n_quantiles = kDefaultQuantiles,
                            std::size_t reservoir = kDefaultReservoir);

struct DatasetManifest {
  std::string reference;
  std::vector<std::string> joined;
  std::map<std::string, std::string> transform_fingerprints;
  std::uint64_t split_seed = 0;
  std::vector<std::int64_t> train_ids, val_ids, test_ids;
};

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace mbsr
