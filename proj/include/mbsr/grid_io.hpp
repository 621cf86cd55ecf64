#pragma once

#include <filesystem>
#include <string>

#include "mbsr/array2d.hpp"

namespace mbsr {

/// Gridded emission field of one compound at one date, kg m^-2 s^-1.
/// Values are row-major, north to south. Ocean / missing cells hold 0.0.
struct EmissionGrid {
  std::string compound;
  std::string date;  // ISO-8601 calendar date, YYYY-MM-DD
  double lat_res = 0.25;
  double lon_res = 0.25;
  Map2D values;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }

  /// Throws Error naming the first offending cell or field.
  void validate() const;
  bool operator==(const EmissionGrid&) const = default;
};

enum class GridFormat { csv, bgrid };

GridFormat parse_grid_format(const std::string& name);
/// Format from the file extension (".csv" or ".bgrid").
GridFormat grid_format_for(const std::filesystem::path& path);

EmissionGrid load_grid(const std::filesystem::path& path, GridFormat format);
void save_grid(const EmissionGrid& grid, const std::filesystem::path& path, GridFormat format);

inline EmissionGrid load_grid(const std::filesystem::path& path) {
  return load_grid(path, grid_format_for(path));
}
inline void save_grid(const EmissionGrid& grid, const std::filesystem::path& path) {
  save_grid(grid, path, grid_format_for(path));
}

bool is_iso_date(const std::string& s);

}  // namespace mbsr
