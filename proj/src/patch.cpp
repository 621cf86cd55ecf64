#include "mbsr/patch.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mbsr/parallel.hpp"

namespace mbsr {

std::vector<PatchRecord> slice_patches(const EmissionGrid& grid, std::size_t patch_size, double min_nonzero_frac,
                                       std::int64_t id_offset, bool degrade) {
  if (patch_size == 0) throw Error("patch size must be positive");
  if (grid.rows() < patch_size || grid.cols() < patch_size)
    throw Error("grid " + std::to_string(grid.rows()) + "x" + std::to_string(grid.cols()) +
                " is smaller than one patch of " + std::to_string(patch_size));
  if (degrade && patch_size % kScale != 0) throw Error("patch size must be divisible by the scale factor");

  const std::size_t tile_rows = grid.rows() / patch_size;
  const std::size_t tile_cols = grid.cols() / patch_size;
  const std::size_t n_tiles = tile_rows * tile_cols;
  std::vector<PatchRecord> all(n_tiles);
  std::vector<char> keep(n_tiles, 0);

  parallel_for(static_cast<std::ptrdiff_t>(n_tiles), [&](std::ptrdiff_t t) {
    const std::size_t tr = static_cast<std::size_t>(t) / tile_cols;
    const std::size_t tc = static_cast<std::size_t>(t) % tile_cols;
    PatchRecord p;
    p.patch_id = id_offset + t;
    p.compound = grid.compound;
    p.date = grid.date;
    p.row0 = tr * patch_size;
    p.col0 = tc * patch_size;
    p.hr = Map2D(patch_size, patch_size);
    std::size_t nonzero = 0;
    for (std::size_t r = 0; r < patch_size; ++r)
      for (std::size_t c = 0; c < patch_size; ++c) {
        const double v = grid.values(p.row0 + r, p.col0 + c);
        p.hr(r, c) = v;
        nonzero += v != 0.0;
      }
    const double frac = static_cast<double>(nonzero) / static_cast<double>(patch_size * patch_size);
    if (frac < min_nonzero_frac) return;
    if (degrade) p.lr = downsample_bicubic(p.hr, kScale);
    all[static_cast<std::size_t>(t)] = std::move(p);
    keep[static_cast<std::size_t>(t)] = 1;
  });

  std::vector<PatchRecord> out;
  for (std::size_t t = 0; t < n_tiles; ++t)
    if (keep[t]) out.push_back(std::move(all[t]));
  return out;
}

void catmull_rom_weights(double t, double w[4]) {
  constexpr double a = -0.5;
  auto near = [](double x) { return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0; };          // |x| <= 1
  auto far = [](double x) { return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a; };      // 1 < |x| < 2
  w[0] = far(1.0 + t);
  w[1] = near(t);
  w[2] = near(1.0 - t);
  w[3] = far(2.0 - t);
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

namespace {

// Separable resampling along rows then columns. Sample k of the output
// reads the source at position src_pos(k).
template <typename PosFn>
Map2D resample(const Map2D& in, std::size_t out_rows, std::size_t out_cols, PosFn src_pos) {
  const auto in_rows = static_cast<std::ptrdiff_t>(in.rows());
  const auto in_cols = static_cast<std::ptrdiff_t>(in.cols());

  struct Taps {
    std::ptrdiff_t idx[4];
    double w[4];
  };
  auto make_taps = [&](std::size_t n_out, std::ptrdiff_t n_in) {
    std::vector<Taps> taps(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
      const double x = src_pos(k);
      const double base = std::floor(x);
      catmull_rom_weights(x - base, taps[k].w);
      for (int m = 0; m < 4; ++m)
        taps[k].idx[m] = reflect_index(static_cast<std::ptrdiff_t>(base) - 1 + m, n_in);
    }
    return taps;
  };
  const auto row_taps = make_taps(out_rows, in_rows);
  const auto col_taps = make_taps(out_cols, in_cols);

  Map2D tmp(in.rows(), out_cols);
  for (std::ptrdiff_t r = 0; r < in_rows; ++r)
    for (std::size_t j = 0; j < out_cols; ++j) {
      const Taps& t = col_taps[j];
      double s = 0.0;
      for (int m = 0; m < 4; ++m) s += t.w[m] * in(static_cast<std::size_t>(r), static_cast<std::size_t>(t.idx[m]));
      tmp(static_cast<std::size_t>(r), j) = s;
    }
  Map2D out(out_rows, out_cols);
  for (std::size_t i = 0; i < out_rows; ++i) {
    const Taps& t = row_taps[i];
    for (std::size_t j = 0; j < out_cols; ++j) {
      double s = 0.0;
      for (int m = 0; m < 4; ++m) s += t.w[m] * tmp(static_cast<std::size_t>(t.idx[m]), j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

Map2D downsample_bicubic(const Map2D& hr, std::size_t alpha) {
  if (alpha == 0 || hr.rows() % alpha != 0 || hr.cols() % alpha != 0)
    throw Error("downsample: size " + std::to_string(hr.rows()) + "x" + std::to_string(hr.cols()) +
                " not divisible by " + std::to_string(alpha));
  const double a = static_cast<double>(alpha);
  auto pos = [a](std::size_t k) { return (static_cast<double>(k) + 0.5) * a - 0.5; };
  Map2D out = resample(hr, hr.rows() / alpha, hr.cols() / alpha, pos);
  for (double& v : out.flat()) v = std::max(v, 0.0);
  return out;
}

Map2D upsample_bicubic(const Map2D& lr, std::size_t alpha) {
  if (alpha == 0 || lr.empty()) throw Error("upsample: empty input or zero factor");
  const double a = static_cast<double>(alpha);
  auto pos = [a](std::size_t k) { return (static_cast<double>(k) + 0.5) / a - 0.5; };
  return resample(lr, lr.rows() * alpha, lr.cols() * alpha, pos);
}

void PatchArchive::add(PatchRecord p) {
  if (!compound.empty() && p.compound != compound)
    throw Error("archive for '" + compound + "' cannot hold a patch of '" + p.compound + "'");
  if (compound.empty()) compound = p.compound;
  const auto id = p.patch_id;
  if (!patches.emplace(id, std::move(p)).second) throw Error("duplicate patch id " + std::to_string(id));
}

const PatchRecord& PatchArchive::at(std::int64_t id) const {
  const auto it = patches.find(id);
  if (it == patches.end()) throw Error("archive '" + compound + "' has no patch " + std::to_string(id));
  return it->second;
}

std::vector<std::int64_t> PatchArchive::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(patches.size());
  for (const auto& [id, _] : patches) out.push_back(id);
  return out;
}

std::map<std::string, PatchArchive> build_archives(const std::vector<EmissionGrid>& grids, std::size_t patch_size) {
  std::set<std::string> dates;
  for (const auto& g : grids) dates.insert(g.date);
  std::map<std::string, std::int64_t> date_index;
  for (const auto& d : dates) date_index.emplace(d, static_cast<std::int64_t>(date_index.size()));

  std::map<std::string, PatchArchive> out;
  std::int64_t tiles = -1;
  for (const auto& g : grids) {
    const auto n = static_cast<std::int64_t>((g.rows() / patch_size) * (g.cols() / patch_size));
    if (tiles >= 0 && n != tiles) throw Error("grids do not share a common geometry");
    tiles = n;
    auto& archive = out[g.compound];
    for (auto& p : slice_patches(g, patch_size, 0.0, date_index.at(g.date) * n)) archive.add(std::move(p));
  }
  return out;
}

void save_archive(const PatchArchive& archive, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error("cannot write archive manifest in " + dir.string());
  manifest << "patch_id,compound,date,row0,col0\n";
  for (const auto& [id, p] : archive.patches) {
    manifest << id << ',' << p.compound << ',' << p.date << ',' << p.row0 << ',' << p.col0 << '\n';
    EmissionGrid g{p.compound, p.date, 0.25, 0.25, p.hr};
    save_grid(g, dir / ("hr_" + std::to_string(id) + ".bgrid"), GridFormat::bgrid);
    if (!p.lr.empty()) {
      g.values = p.lr;
      g.lat_res = g.lon_res = 0.25 * kScale;
      save_grid(g, dir / ("lr_" + std::to_string(id) + ".bgrid"), GridFormat::bgrid);
    }
  }
}

PatchArchive load_archive(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error("no archive manifest in " + dir.string());
  PatchArchive archive;
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("patch_id,compound,date,row0,col0", 0) != 0) throw Error("bad archive manifest header in " + dir.string());
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& s : f)
      if (!std::getline(ss, s, ',')) throw Error("bad manifest row '" + line + "'");
    PatchRecord p;
    p.patch_id = std::stoll(f[0]);
    p.compound = f[1];
    p.date = f[2];
    p.row0 = std::stoull(f[3]);
    p.col0 = std::stoull(f[4]);
    p.hr = load_grid(dir / ("hr_" + f[0] + ".bgrid"), GridFormat::bgrid).values;
    const auto lr_path = dir / ("lr_" + f[0] + ".bgrid");
    p.lr = std::filesystem::exists(lr_path) ? load_grid(lr_path, GridFormat::bgrid).values : downsample_bicubic(p.hr);
    archive.add(std::move(p));
  }
  return archive;
}

}  // namespace mbsr
