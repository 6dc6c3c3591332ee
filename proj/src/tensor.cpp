#include "headline_forge/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "headline_forge/error.hpp"

namespace hf {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == shape_size(shape_), ErrorCode::shape,
          "tensor value count " + std::to_string(values_.size()) +
              " does not match shape " + shape_string(shape_));
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t stride = shape_.empty() ? 0 : values_.size() / shape_[0];
  return std::span<double>(values_).subspan(i * stride, stride);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t stride = shape_.empty() ? 0 : values_.size() / shape_[0];
  return std::span<const double>(values_).subspan(i * stride, stride);
}

void Tensor::reshape(Shape shape) {
  require(shape_size(shape) == values_.size(), ErrorCode::shape,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

void Tensor::add(const Tensor& other) {
  require(values_.size() == other.values_.size(), ErrorCode::shape,
          "add: " + shape_string(shape_) + " vs " + shape_string(other.shape_));
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

void Tensor::scale(double factor) {
  for (double& v : values_) v *= factor;
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void expect_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    fail(ErrorCode::shape, std::string(what) + ": expected " + shape_string(expected) +
                               ", got " + shape_string(t.shape()));
  }
}

Tensor concat_columns(std::span<const Tensor* const> parts) {
  require(!parts.empty(), ErrorCode::shape, "concat of zero tensors");
  const std::size_t rows = parts.front()->dim(0);
  std::size_t width = 0;
  for (const Tensor* p : parts) {
    require(p->rank() == 2 && p->dim(0) == rows, ErrorCode::shape,
            "concat_columns: incompatible part " + shape_string(p->shape()));
    width += p->dim(1);
  }
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * width;
    for (const Tensor* p : parts) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), dst);
      dst += src.size();
    }
  }
  return out;
}

std::vector<Tensor> split_columns(const Tensor& t, std::span<const std::size_t> widths) {
  const std::size_t rows = t.dim(0);
  std::vector<Tensor> parts;
  parts.reserve(widths.size());
  for (std::size_t w : widths) parts.emplace_back(Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = t.data() + r * t.dim(1);
    for (std::size_t p = 0; p < widths.size(); ++p) {
      std::copy(src, src + widths[p], parts[p].data() + r * widths[p]);
      src += widths[p];
    }
  }
  return parts;
}

void round_to_f32(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace hf
