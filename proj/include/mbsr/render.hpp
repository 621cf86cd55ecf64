#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mbsr/array2d.hpp"

namespace mbsr {

struct InterconnectionMatrix;

/// sequential: black (lo) to white (hi), brighter is higher.
/// diverging: blue (lo) through white (midpoint) to red (hi).
enum class Palette { sequential, diverging };

Palette parse_palette(const std::string& s);

using Rgb = std::array<std::uint8_t, 3>;

/// Colour for normalized position t in [0, 1] (clamped).
Rgb palette_color(Palette p, double t);

/// Writes a binary PPM (P6, maxval 255). Each array cell becomes a
/// cell_px x cell_px block. Output bytes depend only on the inputs.
void render_heatmap(const Map2D& values, const std::filesystem::path& path, Palette palette, double lo, double hi,
                    std::size_t cell_px = 1);

/// Upper triangle SSIM, lower triangle PCC, diagonal 1, diverging palette
/// over [-1, 1]; missing cells drawn mid-gray.
void render_interconnection(const InterconnectionMatrix& m, const std::filesystem::path& path,
                            std::size_t cell_px = 16);

}  // namespace mbsr
