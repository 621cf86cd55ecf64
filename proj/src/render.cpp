#include "mbsr/render.hpp"

#include <cmath>
#include <fstream>

#include "mbsr/interconnection.hpp"

namespace mbsr {

Palette parse_palette(const std::string& s) {
  if (s == "sequential") return Palette::sequential;
  if (s == "diverging") return Palette::diverging;
  throw Error("palette must be 'sequential' or 'diverging', got '" + s + "'");
}

Rgb palette_color(Palette p, double t) {
  t = std::isnan(t) ? 0.5 : std::clamp(t, 0.0, 1.0);
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  if (p == Palette::sequential) {
    const auto g = byte(t);
    return {g, g, g};
  }
  if (t < 0.5) {
    const double s = t / 0.5;  // 0 = blue, 1 = white
    return {byte(s), byte(s), 255};
  }
  const double s = (t - 0.5) / 0.5;  // 0 = white, 1 = red
  return {255, byte(1.0 - s), byte(1.0 - s)};
}

namespace {

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::uint8_t> rasterize(const Array2D<Rgb>& cells, std::size_t cell_px) {
  const std::size_t w = cells.cols() * cell_px, h = cells.rows() * cell_px;
  std::vector<std::uint8_t> rgb(w * h * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const Rgb& c = cells(y / cell_px, x / cell_px);
      std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>((y * w + x) * 3));
    }
  return rgb;
}

}  // namespace

void render_heatmap(const Map2D& values, const std::filesystem::path& path, Palette palette, double lo, double hi,
                    std::size_t cell_px) {
  if (values.empty()) throw Error("cannot render an empty array");
  if (!(lo < hi)) throw Error("render: value range must satisfy lo < hi");
  if (cell_px == 0) throw Error("render: cell size must be positive");
  Array2D<Rgb> cells(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values.data()[i];
    if (!std::isfinite(v)) throw Error("render: non-finite value at cell " + std::to_string(i));
    cells.data()[i] = palette_color(palette, (v - lo) / (hi - lo));
  }
  write_ppm(path, values.cols() * cell_px, values.rows() * cell_px, rasterize(cells, cell_px));
}

void render_interconnection(const InterconnectionMatrix& m, const std::filesystem::path& path, std::size_t cell_px) {
  const std::size_t k = m.size();
  if (k == 0) throw Error("cannot render an empty matrix");
  Array2D<Rgb> cells(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double v = i == j ? 1.0 : (j > i ? m.ssim(i, j) : m.pcc(i, j));
      cells(i, j) = std::isnan(v) ? Rgb{128, 128, 128} : palette_color(Palette::diverging, (v + 1.0) / 2.0);
    }
  write_ppm(path, k * cell_px, k * cell_px, rasterize(cells, cell_px));
}

}  // namespace mbsr
