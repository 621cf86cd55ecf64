#pragma once

#include <filesystem>

#include "mbsr/model.hpp"
#include "mbsr/train.hpp"

namespace mbsr {

template <typename T>
struct Checkpoint {
  SrModel<T> model;
  AdamState<T> optimizer;
  std::uint64_t iteration = 0;
};

/// Layout (little-endian): "MBSRCKPT", u32 version, five u64 config fields
/// (in_channels, features, blocks, reduction, scale), u8 scalar width,
/// u32 tensor count, then per tensor: length-prefixed name, u32 rank, u64
/// dims, payload. Followed by ADAM state (u64 step, f64 beta1, beta2, eps,
/// first and second moments in parameter order) and the u64 iteration.
template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path);

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace mbsr
