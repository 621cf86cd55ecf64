#include "mbsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "mbsr/hash.hpp"
#include "mbsr/parallel.hpp"
#include "mbsr/rng.hpp"

namespace mbsr {

std::vector<MisrSample> assemble_misr(const ArchiveSet& archives, const std::string& reference,
                                      const std::vector<std::string>& joined, const TransformSet& transforms,
                                      const std::optional<std::vector<std::int64_t>>& ids) {
  std::vector<std::string> compounds{reference};
  compounds.insert(compounds.end(), joined.begin(), joined.end());
  if (std::set<std::string>(compounds.begin(), compounds.end()).size() != compounds.size())
    throw Error("compound list contains duplicates");

  std::vector<const PatchArchive*> arch;
  std::vector<const QuantileTransform*> tf;
  for (const auto& c : compounds) {
    const auto a = archives.find(c);
    if (a == archives.end()) throw Error("no patch archive for compound '" + c + "'");
    const auto t = transforms.find(c);
    if (t == transforms.end() || !t->second.fitted()) throw Error("transform for compound '" + c + "' is not fitted");
    arch.push_back(&a->second);
    tf.push_back(&t->second);
  }

  std::vector<std::int64_t> order = ids ? *ids : arch[0]->ids();
  std::sort(order.begin(), order.end());
  for (const auto id : order)
    for (std::size_t c = 0; c < compounds.size(); ++c)
      if (!arch[c]->contains(id))
        throw Error("missing aligned patch (" + std::to_string(id) + ", " + compounds[c] + ")");

  std::vector<MisrSample> out(order.size());
  constexpr std::size_t lr_n = kLrSize * kLrSize;
  parallel_for(static_cast<std::ptrdiff_t>(order.size()), [&](std::ptrdiff_t i) {
    const auto id = order[static_cast<std::size_t>(i)];
    MisrSample& s = out[static_cast<std::size_t>(i)];
    s.patch_id = id;
    s.compounds = compounds;
    s.input.resize(compounds.size() * lr_n);
    for (std::size_t c = 0; c < compounds.size(); ++c) {
      const PatchRecord& p = arch[c]->at(id);
      if (p.lr.rows() != kLrSize || p.lr.cols() != kLrSize) throw Error("patch " + std::to_string(id) + " has no 16x16 LR");
      for (std::size_t k = 0; k < lr_n; ++k) s.input[c * lr_n + k] = tf[c]->apply(p.lr.data()[k]);
    }
    const PatchRecord& ref = arch[0]->at(id);
    s.target = tf[0]->apply(ref.hr.flat());
  });
  return out;
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9)
    throw Error("split fractions must be nonnegative and sum to 1");
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  // The epsilon absorbs representation error in fractions like 0.7.
  auto part = [n](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); };
  const std::size_t tr = part(spec.train);
  const std::size_t va = std::min(part(spec.val), n - tr);
  return {tr, va, n - tr - va};
}

SplitIndices split_ids(const std::vector<std::int64_t>& patch_ids, const SplitSpec& spec) {
  if (patch_ids.size() < 10) throw Error("need at least 10 samples to split, got " + std::to_string(patch_ids.size()));
  std::vector<std::size_t> pos(patch_ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return patch_ids[a] < patch_ids[b]; });
  fisher_yates(std::span<std::size_t>(pos), spec.seed);
  const auto sz = split_sizes(pos.size(), spec);
  SplitIndices out;
  out.train.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(sz.train));
  out.val.assign(pos.begin() + static_cast<std::ptrdiff_t>(sz.train),
                 pos.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val));
  out.test.assign(pos.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val), pos.end());
  return out;
}

SplitIndices split_dataset(const std::vector<MisrSample>& samples, const SplitSpec& spec) {
  std::vector<std::int64_t> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.patch_id);
  return split_ids(ids, spec);
}

BatchIterator::BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size, std::uint64_t epoch_seed)
    : base_(std::move(indices)), batch_size_(batch_size), seed_(epoch_seed) {
  if (base_.empty()) throw Error("batch iterator over an empty index list");
  if (batch_size_ == 0) throw Error("batch size must be >= 1");
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_ = base_;
  fisher_yates(std::span<std::size_t>(order_), seed_ + epoch_);
}

std::vector<std::size_t> BatchIterator::next() {
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  if (cursor_ >= order_.size()) {
    ++epoch_;
    cursor_ = 0;
    reshuffle();
  }
  return batch;
}

TransformSet fit_transforms(const ArchiveSet& archives, const std::vector<std::string>& compounds,
                            const std::vector<std::int64_t>& train_ids, std::size_t n_quantiles,
                            std::size_t reservoir) {
  TransformSet out;
  for (const auto& c : compounds) {
    const auto it = archives.find(c);
    if (it == archives.end()) throw Error("no patch archive for compound '" + c + "'");
    std::vector<double> values;
    values.reserve(train_ids.size() * kHrSize * kHrSize);
    for (const auto id : train_ids) {
      const auto& hr = it->second.at(id).hr;
      values.insert(values.end(), hr.flat().begin(), hr.flat().end());
    }
    out.emplace(c, fit_quantile_transform(values, n_quantiles, c, reservoir));
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["reference"] = m.reference;
  j["joined"] = m.joined;
  j["transform_fingerprints"] = m.transform_fingerprints;
  j["split_seed"] = m.split_seed;
  j["train_ids"] = m.train_ids;
  j["val_ids"] = m.val_ids;
  j["test_ids"] = m.test_ids;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset manifest " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    DatasetManifest m;
    m.reference = j.at("reference").get<std::string>();
    m.joined = j.at("joined").get<std::vector<std::string>>();
    m.transform_fingerprints = j.at("transform_fingerprints").get<std::map<std::string, std::string>>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.train_ids = j.at("train_ids").get<std::vector<std::int64_t>>();
    m.val_ids = j.at("val_ids").get<std::vector<std::int64_t>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::int64_t>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed dataset manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace mbsr
