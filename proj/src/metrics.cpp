#include "mbsr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mbsr/interconnection.hpp"
#include "mbsr/parallel.hpp"

namespace mbsr {

double nmse_db(const Map2D& hr, const Map2D& est) {
  if (!hr.same_shape(est) || hr.empty()) throw Error("nmse: inputs must be nonempty and of equal shape");
  double se = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < hr.size(); ++i) {
    const double d = hr.data()[i] - est.data()[i];
    se += d * d;
    energy += hr.data()[i] * hr.data()[i];
  }
  if (energy == 0.0) throw Error("nmse: reference map is identically zero");
  if (se == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(se / energy));
}

double eval_ssim(const Map2D& hr, const Map2D& est) {
  if (!hr.same_shape(est)) throw Error("ssim: shape mismatch");
  const double lo = min_value(hr), hi = max_value(hr);
  const double range = hi > lo ? hi - lo : 1.0;
  Map2D a(hr.rows(), hr.cols()), b(hr.rows(), hr.cols());
  for (std::size_t i = 0; i < hr.size(); ++i) {
    a.data()[i] = (hr.data()[i] - lo) / range;
    b.data()[i] = (est.data()[i] - lo) / range;
  }
  return ssim(a, b, SsimParams{});
}

Map2D error_map(const Map2D& hr, const Map2D& est) {
  if (!hr.same_shape(est)) throw Error("error map: shape mismatch");
  Map2D out(hr.rows(), hr.cols());
  for (std::size_t i = 0; i < hr.size(); ++i) out.data()[i] = std::abs(hr.data()[i] - est.data()[i]);
  return out;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 1 || !(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw Error("histogram: need bins >= 1 and lo < hi");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0), 0, 0};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto b = static_cast<std::size_t>((v - lo) / width);
      h.counts[std::min(b, bins - 1)] += 1;
    }
  }
  return h;
}

std::vector<Map2D> predict(const SrModel<float>& model, const std::vector<MisrSample>& samples,
                           std::span<const std::size_t> indices, std::size_t batch_size) {
  std::vector<Map2D> out;
  out.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const auto y = infer(model, make_input_batch<float>(samples, chunk));
    for (std::size_t n = 0; n < chunk.size(); ++n) {
      Map2D m(y.h, y.w);
      for (std::size_t i = 0; i < y.plane(); ++i) m.data()[i] = y.data[n * y.plane() + i];
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<Map2D> predict_bicubic(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices) {
  std::vector<Map2D> out;
  for (auto i : indices) {
    const auto& s = samples.at(i);
    Map2D lr(kLrSize, kLrSize, std::vector<double>(s.input.begin(), s.input.begin() + kLrSize * kLrSize));
    Map2D up = upsample_bicubic(lr, kScale);
    for (double& v : up.flat()) v = std::clamp(v, 0.0, 1.0);
    out.push_back(std::move(up));
  }
  return out;
}

Map2D to_physical(const Map2D& prediction, const QuantileTransform& t, std::size_t* clamped) {
  return Map2D(prediction.rows(), prediction.cols(), t.invert(prediction.flat(), clamped));
}

EvalReport evaluate_predictions(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices,
                                const std::vector<Map2D>& predictions, const PatchArchive& reference,
                                const QuantileTransform& tf, const std::string& tag) {
  if (indices.empty()) throw Error("evaluation over an empty test set");
  if (predictions.size() != indices.size()) throw Error("prediction count does not match test set");
  const auto& first = samples.at(indices[0]);
  if (first.compounds.empty() || first.compounds[0] != reference.compound || tf.compound() != reference.compound)
    throw Error("transform / archive / sample reference compounds disagree");

  struct Row {
    SampleScore score;
    bool excluded = false;
    std::size_t clamped = 0;
  };
  std::vector<Row> rows(indices.size());
  parallel_for(static_cast<std::ptrdiff_t>(indices.size()), [&](std::ptrdiff_t k) {
    const auto i = static_cast<std::size_t>(k);
    const auto& s = samples.at(indices[i]);
    const Map2D& hr = reference.at(s.patch_id).hr;
    Row& row = rows[i];
    row.score.patch_id = s.patch_id;
    if (max_value(hr) == 0.0) {
      row.excluded = true;
      return;
    }
    const Map2D est = to_physical(predictions[i], tf, &row.clamped);
    row.score.nmse_db = nmse_db(hr, est);
    row.score.ssim = eval_ssim(hr, est);
  });

  EvalReport r;
  r.dataset_tag = tag;
  r.compounds = first.compounds;
  for (const auto& row : rows) {
    r.clamped += row.clamped;
    if (row.excluded)
      r.excluded.push_back(row.score.patch_id);
    else
      r.samples.push_back(row.score);
  }
  std::sort(r.samples.begin(), r.samples.end(), [](const auto& a, const auto& b) { return a.patch_id < b.patch_id; });
  std::sort(r.excluded.begin(), r.excluded.end());
  if (r.samples.empty()) throw Error("every test patch has an all-zero reference map");
  for (const auto& s : r.samples) {
    r.mean_ssim += s.ssim;
    r.mean_nmse_db += s.nmse_db;
  }
  r.mean_ssim /= static_cast<double>(r.samples.size());
  r.mean_nmse_db /= static_cast<double>(r.samples.size());
  return r;
}

EvalReport evaluate(const SrModel<float>& model, const std::vector<MisrSample>& samples,
                    std::span<const std::size_t> indices, const PatchArchive& reference,
                    const QuantileTransform& reference_transform, const std::string& tag) {
  if (indices.empty()) throw Error("evaluation over an empty test set");
  if (samples.at(indices[0]).channels() != model.config().in_channels)
    throw Error("model channel count does not match the samples");
  return evaluate_predictions(samples, indices, predict(model, samples, indices), reference, reference_transform, tag);
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}
}  // namespace

void write_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "patch_id,ssim,nmse_db\n";
  for (const auto& s : r.samples) out << s.patch_id << ',' << num(s.ssim) << ',' << num(s.nmse_db) << '\n';
}

void write_report_json(const EvalReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset_tag;
  j["channels"] = r.channels();
  j["compounds"] = r.compounds;
  j["n_samples"] = r.samples.size();
  j["excluded"] = r.excluded;
  j["mean_ssim"] = r.mean_ssim;
  j["mean_nmse_db"] = r.mean_nmse_db;
  j["inverse_clamped"] = r.clamped;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_comparison_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "dataset,C,compounds,mean_ssim,mean_nmse_db\n";
  for (const auto& r : reports)
    out << r.dataset_tag << ',' << r.channels() << ',' << join(r.compounds, '+') << ',' << num(r.mean_ssim) << ','
        << num(r.mean_nmse_db) << '\n';
}

std::string comparison_text(const std::vector<EvalReport>& reports) {
  std::size_t tag_w = 7, comp_w = 9;
  for (const auto& r : reports) {
    tag_w = std::max(tag_w, r.dataset_tag.size());
    comp_w = std::max(comp_w, join(r.compounds, '+').size());
  }
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %2s  %-*s  %6s  %10s\n", static_cast<int>(tag_w), "dataset", "C",
                static_cast<int>(comp_w), "compounds", "SSIM", "NMSE [dB]");
  os << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s  %2zu  %-*s  %6.3f  %10.2f\n", static_cast<int>(tag_w), r.dataset_tag.c_str(),
                  r.channels(), static_cast<int>(comp_w), join(r.compounds, '+').c_str(), r.mean_ssim, r.mean_nmse_db);
    os << buf;
  }
  return os.str();
}

void write_histogram_csv(const Histogram& a, const Histogram& b, const std::filesystem::path& path) {
  if (a.counts.size() != b.counts.size() || a.lo != b.lo || a.hi != b.hi) throw Error("histograms must share binning");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "bin_lo,bin_hi,hr,sr\n";
  const double width = (a.hi - a.lo) / static_cast<double>(a.counts.size());
  for (std::size_t i = 0; i < a.counts.size(); ++i)
    out << num(a.lo + width * static_cast<double>(i)) << ',' << num(a.lo + width * static_cast<double>(i + 1)) << ','
        << a.counts[i] << ',' << b.counts[i] << '\n';
  out << "underflow,," << a.underflow << ',' << b.underflow << '\n';
  out << "overflow,," << a.overflow << ',' << b.overflow << '\n';
}

}  // namespace mbsr
