#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mbsr/dataset.hpp"
#include "mbsr/model.hpp"

namespace mbsr {

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(mean((hr - est)^2) / mean(hr^2)); kNmseFloorDb when the MSE is 0.
double nmse_db(const Map2D& hr, const Map2D& est);

/// SSIM of est against hr after min-max normalizing both by the range of hr.
double eval_ssim(const Map2D& hr, const Map2D& est);

/// |hr - est| elementwise.
Map2D error_map(const Map2D& hr, const Map2D& est);

struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0, overflow = 0;
};

/// Equal-width half-open bins over [lo, hi); the last bin also takes hi.
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

struct SampleScore {
  std::int64_t patch_id = 0;
  double ssim = 0.0;
  double nmse_db = 0.0;
};

struct EvalReport {
  std::string dataset_tag;
  std::vector<std::string> compounds;  // reference first
  std::vector<SampleScore> samples;    // ascending patch_id
  std::vector<std::int64_t> excluded;  // all-zero HR, NMSE undefined
  double mean_ssim = 0.0;
  double mean_nmse_db = 0.0;
  std::size_t clamped = 0;  // inverse-transform inputs outside [0, 1]

  std::size_t channels() const { return compounds.size(); }
};

/// Transformed-domain 64x64 predictions of the clamped network.
std::vector<Map2D> predict(const SrModel<float>& model, const std::vector<MisrSample>& samples,
                           std::span<const std::size_t> indices, std::size_t batch_size = 16);

/// Baseline: bicubic x4 upsampling of channel 0, clamped to [0, 1].
std::vector<Map2D> predict_bicubic(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices);

/// Inverts the reference transform and scores each prediction against the
/// physical HR patch of the reference archive.
EvalReport evaluate_predictions(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices,
                                const std::vector<Map2D>& predictions, const PatchArchive& reference,
                                const QuantileTransform& reference_transform, const std::string& tag);

EvalReport evaluate(const SrModel<float>& model, const std::vector<MisrSample>& samples,
                    std::span<const std::size_t> indices, const PatchArchive& reference,
                    const QuantileTransform& reference_transform, const std::string& tag);

/// Physical-unit estimate from a transformed-domain prediction.
Map2D to_physical(const Map2D& prediction, const QuantileTransform& t, std::size_t* clamped = nullptr);

void write_report_csv(const EvalReport& r, const std::filesystem::path& path);
void write_report_json(const EvalReport& r, const std::filesystem::path& path);

/// Table of mean SSIM / NMSE per configuration, as CSV and aligned text.
void write_comparison_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);
std::string comparison_text(const std::vector<EvalReport>& reports);

void write_histogram_csv(const Histogram& a, const Histogram& b, const std::filesystem::path& path);

}  // namespace mbsr
