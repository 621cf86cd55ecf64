#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "mbsr/error.hpp"

namespace mbsr {

/// Dense row-major 2-D array. Row 0 is the northernmost row of a grid.
template <typename T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Array2D(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw Error("Array2D: payload size does not match dims");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  const std::vector<T>& vec() const { return data_; }

  bool same_shape(const Array2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Array2D&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Map2D = Array2D<double>;

inline double max_value(const Map2D& m) {
  return m.empty() ? 0.0 : *std::max_element(m.flat().begin(), m.flat().end());
}
inline double min_value(const Map2D& m) {
  return m.empty() ? 0.0 : *std::min_element(m.flat().begin(), m.flat().end());
}

}  // namespace mbsr
