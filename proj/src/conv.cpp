#include "headline_forge/conv.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "headline_forge/error.hpp"

namespace hf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct Geometry {
  std::size_t ch, h, w, kh, kw, pad_h, pad_w, oh, ow;
};

// col has shape [ch*kh*kw, oh*ow].
void im2col(const double* image, const Geometry& g, double* col) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.ch; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* dst = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const long ii = static_cast<long>(oi + ki) - static_cast<long>(g.pad_h);
          double* row = dst + oi * g.ow;
          if (ii < 0 || ii >= static_cast<long>(g.h)) {
            std::fill(row, row + g.ow, 0.0);
            continue;
          }
          const double* src = image + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const long jj = static_cast<long>(oj + kj) - static_cast<long>(g.pad_w);
            row[oj] = (jj < 0 || jj >= static_cast<long>(g.w)) ? 0.0
                                                                 : src[static_cast<std::size_t>(jj)];
          }
        }
      }
}

void col2im_add(const double* col, const Geometry& g, double* image) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.ch; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* src = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const long ii = static_cast<long>(oi + ki) - static_cast<long>(g.pad_h);
          if (ii < 0 || ii >= static_cast<long>(g.h)) continue;
          double* dst = image + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const long jj = static_cast<long>(oj + kj) - static_cast<long>(g.pad_w);
            if (jj < 0 || jj >= static_cast<long>(g.w)) continue;
            dst[static_cast<std::size_t>(jj)] += src[oi * g.ow + oj];
          }
        }
      }
}

}  // namespace

Conv2d::Conv2d(const std::string& name, std::size_t ch_in, std::size_t ch_out,
               std::size_t kernel_h, std::size_t kernel_w, Padding padding, Rng& rng)
    : weight(name + ".weight",
             uniform_tensor({ch_out, ch_in, kernel_h, kernel_w},
                            std::sqrt(6.0 / static_cast<double>(ch_in * kernel_h * kernel_w)),
                            rng)),
      bias(name + ".bias", Tensor({ch_out})),
      padding_(padding) {
  if (padding == Padding::same) {
    require(kernel_h % 2 == 1 && kernel_w % 2 == 1, ErrorCode::config,
            name + ": same padding needs odd kernel sizes");
  }
}

std::pair<std::size_t, std::size_t> Conv2d::output_size(std::size_t h, std::size_t w) const {
  if (padding_ == Padding::same) return {h, w};
  if (kernel_h() > h || kernel_w() > w) {
    fail(ErrorCode::shape, weight.name + ": kernel " + std::to_string(kernel_h()) + "x" +
                               std::to_string(kernel_w()) + " larger than input " +
                               std::to_string(h) + "x" + std::to_string(w));
  }
  return {h - kernel_h() + 1, w - kernel_w() + 1};
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != in_channels()) {
    fail(ErrorCode::shape, weight.name + ": input " + shape_string(x.shape()) +
                               " incompatible with kernels " + shape_string(weight.value.shape()));
  }
  const auto [oh, ow] = output_size(x.dim(2), x.dim(3));
  const Geometry g{x.dim(1),  x.dim(2), x.dim(3),
                   kernel_h(), kernel_w(),
                   padding_ == Padding::same ? kernel_h() / 2 : 0,
                   padding_ == Padding::same ? kernel_w() / 2 : 0,
                   oh,        ow};
  const std::size_t batch = x.dim(0), cout = out_channels();
  const std::size_t patch = g.ch * g.kh * g.kw, plane = oh * ow;
  Tensor y({batch, cout, oh, ow});
  std::vector<double> col(patch * plane);
  ConstMatrixMap wm(weight.value.data(), cout, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.data() + b * g.ch * g.h * g.w, g, col.data());
    MatrixMap out(y.data() + b * cout * plane, cout, plane);
    out.noalias() = wm * ConstMatrixMap(col.data(), patch, plane);
    for (std::size_t c = 0; c < cout; ++c) {
      const double bc = bias.value[c];
      double* r = out.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = r[i] + bc;
        r[i] = v > 0.0 ? v : 0.0;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
  const std::size_t oh = y.dim(2), ow = y.dim(3);
  const Geometry g{x.dim(1),  x.dim(2), x.dim(3),
                   kernel_h(), kernel_w(),
                   padding_ == Padding::same ? kernel_h() / 2 : 0,
                   padding_ == Padding::same ? kernel_w() / 2 : 0,
                   oh,        ow};
  const std::size_t batch = x.dim(0), cout = out_channels();
  const std::size_t patch = g.ch * g.kh * g.kw, plane = oh * ow;
  Tensor dx(x.shape());
  std::vector<double> col(patch * plane), dcol(patch * plane), dz(cout * plane);
  ConstMatrixMap wm(weight.value.data(), cout, patch);
  MatrixMap dwm(weight.grad.data(), cout, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* yb = y.data() + b * cout * plane;
    const double* dyb = dy.data() + b * cout * plane;
    for (std::size_t i = 0; i < cout * plane; ++i) dz[i] = yb[i] > 0.0 ? dyb[i] : 0.0;
    for (std::size_t c = 0; c < cout; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += dz[c * plane + i];
      bias.grad[c] += s;
    }
    im2col(x.data() + b * g.ch * g.h * g.w, g, col.data());
    ConstMatrixMap dzm(dz.data(), cout, plane);
    dwm.noalias() += dzm * ConstMatrixMap(col.data(), patch, plane).transpose();
    MatrixMap(dcol.data(), patch, plane).noalias() = wm.transpose() * dzm;
    col2im_add(dcol.data(), g, dx.data() + b * g.ch * g.h * g.w);
  }
  return dx;
}

namespace {

// [batch, len, ch] <-> [batch, ch, 1, len]
Tensor to_planar(const Tensor& x) {
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  Tensor out({batch, ch, 1, len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < ch; ++c) out.at(b, c, 0, t) = x.at(b, t, c);
  return out;
}

Tensor from_planar(const Tensor& x) {
  const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(3);
  Tensor out({batch, len, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < len; ++t) out.at(b, t, c) = x.at(b, c, 0, t);
  return out;
}

}  // namespace

Conv1d::Conv1d(const std::string& name, std::size_t ch_in, std::size_t ch_out, std::size_t width,
               Padding padding, Rng& rng)
    : conv_(name, ch_in, ch_out, 1, width, padding, rng) {}

Tensor Conv1d::forward(const Tensor& x) const {
  require(x.rank() == 3, ErrorCode::shape,
          conv_.weight.name + ": conv1d expects [batch, len, ch], got " + shape_string(x.shape()));
  return from_planar(conv_.forward(to_planar(x)));
}

Tensor Conv1d::backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
  return from_planar(conv_.backward(to_planar(x), to_planar(y), to_planar(dy)));
}

}  // namespace hf
