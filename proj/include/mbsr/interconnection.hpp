#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbsr/grid_io.hpp"

namespace mbsr {

/// Pearson correlation of the flattened arrays. nullopt when either input
/// has zero variance.
std::optional<double> pcc(const Map2D& a, const Map2D& b);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Normalized 1-D Gaussian window of the given size.
std::vector<double> gaussian_window(std::size_t size, double sigma);

/// Mean SSIM over all valid (fully inside) window positions, Gaussian
/// weighted, C1 = (k1 L)^2, C2 = (k2 L)^2.
double ssim(const Map2D& a, const Map2D& b, const SsimParams& params = {});

/// Per-map min-max normalization into [0, 1]; a constant map becomes zeros.
Map2D minmax_normalize(const Map2D& m);

struct InterconnectionMatrix {
  std::vector<std::string> compounds;  // sorted
  Map2D ssim;                          // NaN where no shared date
  Map2D pcc;                           // NaN where undefined
  Array2D<int> n_pairs;                // maps averaged per cell

  std::size_t index_of(const std::string& compound) const;
  std::size_t size() const { return compounds.size(); }
};

/// Cell (i, j) is the mean metric over dates where both compounds have a map.
/// SSIM uses per-map min-max normalized values with L = 1; PCC uses raw values.
/// Zero-variance maps are excluded from the PCC mean.
InterconnectionMatrix build_matrix(const std::vector<EmissionGrid>& maps, const SsimParams& params = {});

enum class RankMode { most, least };
RankMode parse_rank_mode(const std::string& s);

/// Non-reference compounds ordered by the reference's SSIM row (descending
/// for most, ascending for least), ties by identifier. Missing cells are
/// never selected.
std::vector<std::string> rank_compounds(const InterconnectionMatrix& m, const std::string& reference, std::size_t k,
                                        RankMode mode);

/// Writes ssim.csv and pcc.csv into dir.
void write_matrix_csv(const InterconnectionMatrix& m, const std::filesystem::path& dir);

}  // namespace mbsr
