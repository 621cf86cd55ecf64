#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mbsr/grid_io.hpp"

namespace mbsr {

inline constexpr std::size_t kHrSize = 64;
inline constexpr std::size_t kLrSize = 16;
inline constexpr std::size_t kScale = 4;

struct PatchRecord {
  std::int64_t patch_id = 0;
  std::string compound;
  std::string date;
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  Map2D hr;
  Map2D lr;  // empty until degraded
};

/// Cuts a grid into non-overlapping top-left-anchored patches. Border cells
/// that do not fill a whole patch are dropped. Patch ids are
/// id_offset + tile_row * tiles_per_row + tile_col, so the same tile gets the
/// same id for every compound sharing the grid geometry. Patches whose
/// nonzero fraction is below min_nonzero_frac are skipped. When degrade is
/// set, each record also carries its bicubic LR counterpart.
std::vector<PatchRecord> slice_patches(const EmissionGrid& grid, std::size_t patch_size = kHrSize,
                                       double min_nonzero_frac = 0.0, std::int64_t id_offset = 0,
                                       bool degrade = true);

/// Catmull-Rom (a = -0.5) weights for fractional offset t in [0, 1), taps at
/// floor(x) - 1 .. floor(x) + 2.
void catmull_rom_weights(double t, double w[4]);

/// Half-sample symmetric reflection of index i into [0, n).
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

/// Bicubic decimation by alpha: output (i, j) is the Catmull-Rom interpolant
/// of hr evaluated at ((i + 0.5) alpha - 0.5, (j + 0.5) alpha - 0.5).
/// Negative ringing is clamped to zero.
Map2D downsample_bicubic(const Map2D& hr, std::size_t alpha = kScale);

/// Bicubic interpolation by alpha (inverse sampling geometry of
/// downsample_bicubic), no clamping.
Map2D upsample_bicubic(const Map2D& lr, std::size_t alpha = kScale);

/// All patches of one compound, keyed by patch id.
struct PatchArchive {
  std::string compound;
  std::map<std::int64_t, PatchRecord> patches;

  void add(PatchRecord p);
  const PatchRecord& at(std::int64_t id) const;
  bool contains(std::int64_t id) const { return patches.contains(id); }
  std::vector<std::int64_t> ids() const;
};

/// Builds per-compound archives from a set of grids. Dates are sorted and
/// each date's tiles are offset by date_index * tiles_per_grid so ids are
/// unique across dates and aligned across compounds.
std::map<std::string, PatchArchive> build_archives(const std::vector<EmissionGrid>& grids,
                                                   std::size_t patch_size = kHrSize);

/// Directory layout: manifest.csv (patch_id,compound,date,row0,col0) and
/// hr_<id>.bgrid / lr_<id>.bgrid per patch.
void save_archive(const PatchArchive& archive, const std::filesystem::path& dir);
PatchArchive load_archive(const std::filesystem::path& dir);

}  // namespace mbsr
