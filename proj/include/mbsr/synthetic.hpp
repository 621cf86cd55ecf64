#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mbsr/grid_io.hpp"

namespace mbsr {

/// One synthetic compound. Its latent field is
///   g = rho * shared + sqrt(1 - rho^2) * own
/// where `shared` is the common field, or (complementary mode) the
/// standardized high-frequency residual of the first compound's latent.
/// Emissions are 1e-9 exp(gamma (g - max g)) floored at 1e-30, then zeroed
/// where g is below its `sparsity` quantile.
struct SynthCompound {
  std::string tag;
  double rho = 1.0;
  double sparsity = 0.0;
  double gamma = 1.0;
  std::uint64_t seed = 1;
  bool complementary = false;
};

struct SynthSpec {
  std::size_t rows = 256;
  std::size_t cols = 256;
  double correlation_length = 4.0;  // Gaussian smoothing scale, cells
  double hf_scale = 2.0;            // smoothing scale defining the HF residual
  std::uint64_t shared_seed = 0;
  std::vector<SynthCompound> compounds;
  std::vector<std::string> dates{"2020-01-01"};
  double lat_res = 0.25;
  double lon_res = 0.25;

  void validate() const;
};

inline constexpr double kEmissionMax = 1e-9;
inline constexpr double kEmissionMin = 1e-30;

/// Periodic separable Gaussian blur (kernel truncated at 4 sigma).
Map2D gaussian_blur(const Map2D& field, double sigma);

/// White noise blurred at correlation_length, standardized to zero mean and
/// unit variance. Deterministic per seed.
Map2D gen_field(std::uint64_t seed, std::size_t rows, std::size_t cols, double correlation_length);

/// (x - mean) / std; constant input gives zeros.
Map2D standardize(const Map2D& m);

struct SynthSet {
  std::vector<EmissionGrid> grids;               // compound-major, then date
  std::map<std::string, std::vector<Map2D>> latents;  // per compound, per date
};

SynthSet gen_compound_set(const SynthSpec& spec);

/// Writes every grid as <dir>/<compound>_<date>.bgrid plus manifest.csv
/// (compound,date,file).
void write_grid_set(const std::vector<EmissionGrid>& grids, const std::filesystem::path& dir);
/// Loads every *.bgrid / *.csv grid in dir (sorted by file name).
std::vector<EmissionGrid> load_grid_set(const std::filesystem::path& dir);

}  // namespace mbsr
