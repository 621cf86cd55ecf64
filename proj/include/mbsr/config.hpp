#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbsr/dataset.hpp"
#include "mbsr/interconnection.hpp"
#include "mbsr/model.hpp"
#include "mbsr/synthetic.hpp"
#include "mbsr/train.hpp"

namespace mbsr {

/// Flat `key = value` text with dotted section keys; `#` starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// For every key K in `keys`, an environment variable PREFIX + upper(K)
  /// with '.' replaced by '_' overrides the file value.
  void apply_env(const std::string& prefix, const std::vector<std::string>& keys);

  static std::string env_name(const std::string& prefix, const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

/// Joined compounds: an explicit comma list or an `auto:most:k` /
/// `auto:least:k` selector resolved against the interconnection matrix.
struct JoinedSelector {
  std::vector<std::string> compounds;
  std::optional<RankMode> mode;
  std::size_t k = 0;

  bool is_auto() const { return mode.has_value(); }
};

JoinedSelector parse_joined(const std::string& text);

inline constexpr const char* kEnvPrefix = "MBSR_";

struct RunConfig {
  std::filesystem::path grids;  // data.grids; empty -> synthesize
  std::filesystem::path out = "mbsr_out";
  std::string reference;
  std::string joined;  // "a,b", "auto:most:k", "auto:least:k" or empty (single-image)
  double min_nonzero_frac = 0.0;
  std::size_t n_quantiles = kDefaultQuantiles;
  SrModelConfig model;
  TrainConfig train;
  SplitSpec split;
  SynthSpec synth;
  std::size_t figures = 2;
  std::string tag;

  /// Every key understood by from_kv, for env overrides and typo checks.
  static const std::vector<std::string>& known_keys();
  static RunConfig from_kv(const KeyValueConfig& kv);
  /// Checks referenced paths exist and values are consistent.
  void validate() const;
};

/// Parses "tag:rho:sparsity:gamma:seed[:complementary]" entries separated by ';'.
std::vector<SynthCompound> parse_synth_compounds(const std::string& text);

}  // namespace mbsr
