#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mbsr {

/// Fitted per-compound monotone map from emissions to [0, 1]: the
/// piecewise-linear empirical CDF through n knots at probabilities
/// k / (n - 1). A run of equal knots (a mass point, typically the zero
/// emissions) maps to the midpoint of its probability interval.
class QuantileTransform {
 public:
  QuantileTransform() = default;
  QuantileTransform(std::string compound, std::vector<double> knots, std::uint64_t fitted_on);

  const std::string& compound() const { return compound_; }
  const std::vector<double>& knots() const { return knots_; }
  std::size_t n() const { return knots_.size(); }
  std::uint64_t fitted_on() const { return fitted_on_; }
  bool fitted() const { return knots_.size() >= 2; }

  double apply(double x) const;
  /// Clamps u into [0, 1]; increments *clamped when it had to.
  double invert(double u, std::size_t* clamped = nullptr) const;

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> invert(std::span<const double> u, std::size_t* clamped = nullptr) const;

  bool operator==(const QuantileTransform&) const = default;

 private:
  double prob(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(knots_.size() - 1); }

  std::string compound_;
  std::vector<double> knots_;
  std::uint64_t fitted_on_ = 0;
};

inline constexpr std::size_t kDefaultQuantiles = 1000;
inline constexpr std::size_t kDefaultReservoir = 1'000'000;

/// Knot k is the empirical quantile at probability k / (n - 1), linearly
/// interpolated between order statistics. Inputs larger than the reservoir
/// are subsampled with a seeded reservoir.
QuantileTransform fit_quantile_transform(std::span<const double> samples, std::size_t n_quantiles,
                                         const std::string& compound, std::size_t reservoir = kDefaultReservoir,
                                         std::uint64_t seed = 0);

/// Quantile of sorted data at probability p, linear between order statistics.
double sorted_quantile(std::span<const double> sorted, double p);

/// Binary format: "QTRF", version byte, length-prefixed compound tag,
/// u64 fingerprint, u32 n, n little-endian f64 knots.
void save_transform(const QuantileTransform& t, const std::filesystem::path& path);
QuantileTransform load_transform(const std::filesystem::path& path);
/// JSON sidecar for inspection (compound, n, fingerprint, knots).
void save_transform_json(const QuantileTransform& t, const std::filesystem::path& path);

}  // namespace mbsr
