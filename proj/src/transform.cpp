#include "mbsr/transform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "mbsr/binio.hpp"
#include "mbsr/error.hpp"
#include "mbsr/hash.hpp"
#include "mbsr/rng.hpp"

namespace mbsr {

QuantileTransform::QuantileTransform(std::string compound, std::vector<double> knots, std::uint64_t fitted_on)
    : compound_(std::move(compound)), knots_(std::move(knots)), fitted_on_(fitted_on) {
  if (knots_.size() < 2) throw Error("quantile transform needs at least 2 knots");
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(knots_[k])) throw Error("non-finite knot");
    if (k > 0 && knots_[k] < knots_[k - 1]) throw Error("knots must be nondecreasing");
  }
}

double QuantileTransform::apply(double x) const {
  if (!fitted()) throw Error("transform for '" + compound_ + "' is not fitted");
  if (!std::isfinite(x)) throw Error("non-finite input to transform '" + compound_ + "'");
  if (x < knots_.front()) return 0.0;
  if (x > knots_.back()) return 1.0;
  const auto lo = std::lower_bound(knots_.begin(), knots_.end(), x);
  if (*lo == x) {
    const auto hi = std::upper_bound(lo, knots_.end(), x);
    const auto first = static_cast<std::size_t>(lo - knots_.begin());
    const auto last = static_cast<std::size_t>(hi - knots_.begin()) - 1;
    return first == last ? prob(first) : 0.5 * (prob(first) + prob(last));
  }
  // knots_[k] < x < knots_[k + 1]
  const auto k = static_cast<std::size_t>(lo - knots_.begin()) - 1;
  const double t = (x - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return prob(k) + t * (prob(k + 1) - prob(k));
}

double QuantileTransform::invert(double u, std::size_t* clamped) const {
  if (!fitted()) throw Error("transform for '" + compound_ + "' is not fitted");
  if (std::isnan(u)) throw Error("NaN input to inverse transform '" + compound_ + "'");
  if (u < 0.0 || u > 1.0) {
    u = std::clamp(u, 0.0, 1.0);
    if (clamped) ++*clamped;
  }
  const std::size_t last = knots_.size() - 1;
  const double pos = u * static_cast<double>(last);
  auto k = static_cast<std::size_t>(pos);
  if (k >= last) return knots_[last];
  // Probabilities are equispaced, but recompute the fraction against prob()
  // so invert(apply(x)) uses the same interval arithmetic.
  while (k > 0 && prob(k) > u) --k;
  while (k + 1 < last && prob(k + 1) <= u) ++k;
  const double t = (u - prob(k)) / (prob(k + 1) - prob(k));
  if (knots_[k] == knots_[k + 1]) return knots_[k];
  return knots_[k] + t * (knots_[k + 1] - knots_[k]);
}

std::vector<double> QuantileTransform::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply(x[i]);
  return out;
}

std::vector<double> QuantileTransform::invert(std::span<const double> u, std::size_t* clamped) const {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = invert(u[i], clamped);
  return out;
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

QuantileTransform fit_quantile_transform(std::span<const double> samples, std::size_t n_quantiles,
                                         const std::string& compound, std::size_t reservoir, std::uint64_t seed) {
  if (samples.size() < 2) throw Error("fitting '" + compound + "' needs at least 2 samples");
  if (n_quantiles < 2) throw Error("n_quantiles must be >= 2");
  Fnv1a fp;
  fp.update(compound);
  for (double v : samples)
    if (!std::isfinite(v)) throw Error("non-finite sample while fitting '" + compound + "'");
  fp.update(samples);

  std::vector<double> pool;
  if (reservoir >= 2 && samples.size() > reservoir) {
    // Algorithm R
    pool.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(reservoir));
    SplitMix64 rng(seed);
    for (std::size_t i = reservoir; i < samples.size(); ++i) {
      const auto j = rng.bounded(i + 1);
      if (j < reservoir) pool[j] = samples[i];
    }
  } else {
    pool.assign(samples.begin(), samples.end());
  }
  std::sort(pool.begin(), pool.end());

  // Position k (m - 1) / (n - 1) in exact integer arithmetic, so knots that
  // land on an order statistic take its value exactly.
  const std::uint64_t m1 = pool.size() - 1, n1 = n_quantiles - 1;
  std::vector<double> knots(n_quantiles);
  for (std::size_t k = 0; k < n_quantiles; ++k) {
    const std::uint64_t num = k * m1, lo = num / n1, rem = num % n1;
    knots[k] = rem == 0 || pool[lo] == pool[lo + 1]
                   ? pool[lo]
                   : pool[lo] + static_cast<double>(rem) / static_cast<double>(n1) * (pool[lo + 1] - pool[lo]);
  }
  knots.front() = pool.front();
  knots.back() = pool.back();
  return QuantileTransform(compound, std::move(knots), fp.digest());
}

namespace {
constexpr char kMagic[4] = {'Q', 'T', 'R', 'F'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

void save_transform(const QuantileTransform& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 4);
  binio::put<std::uint8_t>(out, kVersion);
  binio::put_string(out, t.compound());
  binio::put<std::uint64_t>(out, t.fitted_on());
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.n()));
  binio::put_array(out, t.knots().data(), t.n());
  if (!out) throw Error("write failed for " + path.string());
}

QuantileTransform load_transform(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("not a transform file: " + path.string());
  if (binio::get<std::uint8_t>(in) != kVersion) throw Error("unsupported transform version in " + path.string());
  auto compound = binio::get_string(in);
  const auto fp = binio::get<std::uint64_t>(in);
  const auto n = binio::get<std::uint32_t>(in);
  std::vector<double> knots(n);
  binio::get_array(in, knots.data(), n);
  return QuantileTransform(std::move(compound), std::move(knots), fp);
}

void save_transform_json(const QuantileTransform& t, const std::filesystem::path& path) {
  nlohmann::json j;
  j["compound"] = t.compound();
  j["n"] = t.n();
  j["fitted_on"] = to_hex(t.fitted_on());
  j["knots"] = t.knots();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace mbsr
