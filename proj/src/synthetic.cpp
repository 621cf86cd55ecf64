#include "mbsr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "mbsr/rng.hpp"

namespace mbsr {

void SynthSpec::validate() const {
  if (rows < 8 || cols < 8) throw Error("synthetic grids must be at least 8x8");
  if (!(correlation_length >= 1.0)) throw Error("correlation_length must be >= 1");
  if (!(hf_scale > 0.0)) throw Error("hf_scale must be positive");
  if (compounds.empty()) throw Error("synthetic spec has no compounds");
  if (dates.empty()) throw Error("synthetic spec has no dates");
  std::set<std::string> tags;
  for (const auto& c : compounds) {
    if (c.tag.empty() || !tags.insert(c.tag).second) throw Error("compound tags must be unique and nonempty");
    if (!(c.rho >= 0.0 && c.rho <= 1.0)) throw Error(c.tag + ": rho must be in [0, 1]");
    if (!(c.sparsity >= 0.0 && c.sparsity < 1.0)) throw Error(c.tag + ": sparsity must be in [0, 1)");
    if (!(c.gamma > 0.0)) throw Error(c.tag + ": gamma must be positive");
  }
  for (const auto& d : dates)
    if (!is_iso_date(d)) throw Error("synthetic date '" + d + "' is not YYYY-MM-DD");
}

Map2D gaussian_blur(const Map2D& field, double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;

  const auto rows = static_cast<std::ptrdiff_t>(field.rows()), cols = static_cast<std::ptrdiff_t>(field.cols());
  auto wrap = [](std::ptrdiff_t i, std::ptrdiff_t n) { return static_cast<std::size_t>(((i % n) + n) % n); };
  Map2D tmp(field.rows(), field.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        s += k[static_cast<std::size_t>(i + radius)] * field(static_cast<std::size_t>(r), wrap(c + i, cols));
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  Map2D out(field.rows(), field.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        s += k[static_cast<std::size_t>(i + radius)] * tmp(wrap(r + i, rows), static_cast<std::size_t>(c));
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  return out;
}

Map2D standardize(const Map2D& m) {
  double mean = 0.0;
  for (double v : m.flat()) mean += v;
  mean /= static_cast<double>(m.size());
  double var = 0.0;
  for (double v : m.flat()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(m.size());
  Map2D out(m.rows(), m.cols());
  if (var > 0.0) {
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = (m.data()[i] - mean) * inv;
  }
  return out;
}

Map2D gen_field(std::uint64_t seed, std::size_t rows, std::size_t cols, double correlation_length) {
  if (rows < 8 || cols < 8) throw Error("gen_field: dims must be at least 8x8");
  if (!(correlation_length >= 1.0)) throw Error("gen_field: correlation_length must be >= 1");
  SplitMix64 rng(seed);
  Map2D noise(rows, cols);
  for (double& v : noise.flat()) v = rng.normal();
  return standardize(gaussian_blur(noise, correlation_length));
}

namespace {

// Separate domains keep the shared stream distinct from a compound stream
// even when the user gives both the same seed.
enum Stream : std::uint64_t { kSharedStream = 0x5EED, kOwnStream = 0x0B5EED };

std::uint64_t derive_seed(std::uint64_t base, Stream stream, std::uint64_t date_index) {
  return SplitMix64::mix(base ^ SplitMix64::mix(stream + date_index * SplitMix64::kGamma));
}

EmissionGrid emit(const SynthSpec& spec, const SynthCompound& c, const std::string& date, const Map2D& g) {
  const double gmax = max_value(g);
  double threshold = -std::numeric_limits<double>::infinity();
  if (c.sparsity > 0.0) {
    std::vector<double> sorted(g.flat().begin(), g.flat().end());
    const auto k = static_cast<std::size_t>(c.sparsity * static_cast<double>(sorted.size()));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    threshold = sorted[k];
  }
  EmissionGrid grid{c.tag, date, spec.lat_res, spec.lon_res, Map2D(g.rows(), g.cols())};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.data()[i];
    grid.values.data()[i] =
        x < threshold ? 0.0 : std::max(kEmissionMin, kEmissionMax * std::exp(c.gamma * (x - gmax)));
  }
  return grid;
}

}  // namespace

SynthSet gen_compound_set(const SynthSpec& spec) {
  spec.validate();
  SynthSet out;
  // latents[date][compound]
  std::vector<std::vector<Map2D>> latents(spec.dates.size());
  for (std::size_t d = 0; d < spec.dates.size(); ++d) {
    const Map2D shared =
        gen_field(derive_seed(spec.shared_seed, kSharedStream, d), spec.rows, spec.cols, spec.correlation_length);
    Map2D residual;
    for (std::size_t k = 0; k < spec.compounds.size(); ++k) {
      const auto& c = spec.compounds[k];
      const Map2D own = gen_field(derive_seed(c.seed, kOwnStream, d), spec.rows, spec.cols, spec.correlation_length);
      const Map2D* base = &shared;
      if (c.complementary && k > 0) {
        if (residual.empty()) {
          const Map2D& ref = latents[d][0];
          const Map2D smooth = gaussian_blur(ref, spec.hf_scale);
          Map2D hf(ref.rows(), ref.cols());
          for (std::size_t i = 0; i < ref.size(); ++i) hf.data()[i] = ref.data()[i] - smooth.data()[i];
          residual = standardize(hf);
        }
        base = &residual;
      }
      const double w_own = std::sqrt(std::max(0.0, 1.0 - c.rho * c.rho));
      Map2D g(spec.rows, spec.cols);
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = c.rho * base->data()[i] + w_own * own.data()[i];
      latents[d].push_back(std::move(g));
    }
  }
  for (std::size_t k = 0; k < spec.compounds.size(); ++k)
    for (std::size_t d = 0; d < spec.dates.size(); ++d) {
      out.grids.push_back(emit(spec, spec.compounds[k], spec.dates[d], latents[d][k]));
      out.latents[spec.compounds[k].tag].push_back(latents[d][k]);
    }
  return out;
}

void write_grid_set(const std::vector<EmissionGrid>& grids, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error("cannot write grid manifest in " + dir.string());
  manifest << "compound,date,file\n";
  for (const auto& g : grids) {
    const std::string file = g.compound + "_" + g.date + ".bgrid";
    save_grid(g, dir / file, GridFormat::bgrid);
    manifest << g.compound << ',' << g.date << ',' << file << '\n';
  }
}

std::vector<EmissionGrid> load_grid_set(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("grid directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".bgrid" || (ext == ".csv" && e.path().filename() != "manifest.csv")))
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EmissionGrid> grids;
  for (const auto& f : files) grids.push_back(load_grid(f));
  return grids;
}

}  // namespace mbsr
