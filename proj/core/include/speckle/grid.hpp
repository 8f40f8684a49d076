#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace speckle {

/// Dense row-major 2-D array. Used for single frames and per-pixel maps.
template <typename T>
class Grid {
public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(check_dim(rows)) * static_cast<std::size_t>(check_dim(cols)), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(const Grid& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  static int check_dim(int d) {
    if (d < 0) throw std::invalid_argument("grid dimension must be nonnegative");
    return d;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid<double>;
using Mask = Grid<unsigned char>;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

/// N x H x W stack of nonnegative intensity frames.
class SpeckleSequence {
public:
  SpeckleSequence() = default;
  explicit SpeckleSequence(std::vector<Image> frames);

  int n_frames() const { return static_cast<int>(frames_.size()); }
  int height() const { return frames_.empty() ? 0 : frames_.front().rows(); }
  int width() const { return frames_.empty() ? 0 : frames_.front().cols(); }

  const Image& operator[](int t) const { return frames_[static_cast<std::size_t>(t)]; }
  const std::vector<Image>& frames() const { return frames_; }

  /// First `count` frames as a new sequence.
  SpeckleSequence head(int count) const;

  friend bool operator==(const SpeckleSequence&, const SpeckleSequence&) = default;

private:
  std::vector<Image> frames_;
};

}  // namespace speckle
