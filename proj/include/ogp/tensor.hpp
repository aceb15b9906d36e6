#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "ogp/common.hpp"

namespace ogp {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. The last axis is contiguous; a [N,C,H,W] feature
// map therefore stores scanlines of W contiguously.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    for (int d : shape_)
      if (d <= 0) throw ShapeError("tensor dim must be positive: " + shape_str(shape_));
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), T(0));
  }
  Tensor(Shape shape, T fill) : Tensor(std::move(shape)) {
    std::fill(data_.begin(), data_.end(), fill);
  }

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != size())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(s));
    Tensor out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  // Eigen view of the flat buffer as a rows x cols row-major matrix.
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<Mat> mat(std::int64_t rows, std::int64_t cols) {
    check_view(rows * cols);
    return Eigen::Map<Mat>(data_.data(), rows, cols);
  }
  Eigen::Map<const Mat> mat(std::int64_t rows, std::int64_t cols) const {
    check_view(rows * cols);
    return Eigen::Map<const Mat>(data_.data(), rows, cols);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o) {
    require_same(o);
    for (std::int64_t i = 0; i < size(); ++i) data_[static_cast<std::size_t>(i)] += o[i];
    return *this;
  }
  Tensor& operator*=(T k) {
    for (auto& v : data_) v *= k;
    return *this;
  }

  bool all_finite() const {
    for (const auto& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  void check_view(std::int64_t n) const {
    if (n != size()) throw ShapeError("matrix view size mismatch for " + shape_str(shape_));
  }
  void require_same(const Tensor& o) const {
    if (!same_shape(o))
      throw ShapeError("shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace ogp
