#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hf {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major n-dimensional array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Row view of a rank-2 (or leading-axis) slice.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;
  void fill(double value);
  void add(const Tensor& other);
  void scale(double factor);

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

// Throws ErrorCode::shape with context when the shapes differ.
void expect_shape(const Tensor& t, const Shape& expected, const char* what);

// Concatenate rank-2 tensors along the feature axis.
Tensor concat_columns(std::span<const Tensor* const> parts);
// Inverse of concat_columns: split the gradient back into the given widths.
std::vector<Tensor> split_columns(const Tensor& t, std::span<const std::size_t> widths);

// Round every value to the nearest representable 32-bit float.
void round_to_f32(Tensor& t);

}  // namespace hf
