#include "headline_forge/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "headline_forge/error.hpp"

namespace hf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

}  // namespace

Tensor uniform_tensor(Shape shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight",
             uniform_tensor({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)), rng)),
      bias(name + ".bias", Tensor({out})) {}

Tensor Dense::forward(const Tensor& x) const {
  const std::size_t in = in_features(), out = out_features();
  if (x.rank() != 2 || x.dim(1) != in) {
    fail(ErrorCode::shape, weight.name + ": input " + shape_string(x.shape()) +
                               " incompatible with weight " + shape_string(weight.value.shape()));
  }
  const std::size_t batch = x.dim(0);
  Tensor y({batch, out});
  MatrixMap ym(y.data(), batch, out);
  ym.noalias() = ConstMatrixMap(x.data(), batch, in) * ConstMatrixMap(weight.value.data(), in, out);
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value.data(), out);
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy) {
  const std::size_t in = in_features(), out = out_features(), batch = x.dim(0);
  ConstMatrixMap xm(x.data(), batch, in);
  ConstMatrixMap dym(dy.data(), batch, out);
  MatrixMap(weight.grad.data(), in, out).noalias() += xm.transpose() * dym;
  Eigen::Map<Eigen::RowVectorXd>(bias.grad.data(), out) += dym.colwise().sum();
  Tensor dx({batch, in});
  MatrixMap(dx.data(), batch, in).noalias() =
      dym * ConstMatrixMap(weight.value.data(), in, out).transpose();
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(x[i] > 0.0)) dx[i] = 0.0;
  return dx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = sigmoid_scalar(v);
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
  return dx;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y[i] * y[i];
  return dx;
}

Tensor softmax(const Tensor& x) {
  require(x.rank() >= 1 && x.size() > 0, ErrorCode::shape, "softmax of empty tensor");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * width;
    double* out = y.data() + r * width;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < width; ++j) peak = std::max(peak, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      out[j] = std::exp(in[j] - peak);
      total += out[j];
    }
    for (std::size_t j = 0; j < width; ++j) out[j] /= total;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  const std::size_t width = y.shape().back();
  const std::size_t rows = y.size() / width;
  Tensor dx(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = y.data() + r * width;
    const double* g = dy.data() + r * width;
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) dot += p[j] * g[j];
    for (std::size_t j = 0; j < width; ++j) dx.data()[r * width + j] = p[j] * (g[j] - dot);
  }
  return dx;
}

Embedding::Embedding(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng)
    : table(name + ".table", uniform_tensor({vocab, dim}, 0.05, rng)) {
  require(vocab >= 1, ErrorCode::config, "embedding needs at least the padding row");
  for (std::size_t j = 0; j < dim; ++j) table.value.at(0, j) = 0.0;
}

Tensor Embedding::forward(const IdBatch& ids) const {
  const std::size_t d = dim(), vocab = vocab_size();
  Tensor y({ids.batch, ids.length, d});
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    const std::int32_t id = ids.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      fail(ErrorCode::domain, table.name + ": id " + std::to_string(id) +
                                  " out of range for vocabulary of " + std::to_string(vocab));
    }
    if (id == 0) continue;
    auto src = table.value.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), y.data() + i * d);
  }
  return y;
}

void Embedding::backward(const IdBatch& ids, const Tensor& dy) {
  const std::size_t d = dim();
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    const std::int32_t id = ids.ids[i];
    if (id == 0) continue;
    double* dst = table.grad.data() + static_cast<std::size_t>(id) * d;
    const double* src = dy.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
}

BatchNorm::BatchNorm(const std::string& name, std::size_t features)
    : gamma(name + ".gamma", Tensor({features}, 1.0)),
      beta(name + ".beta", Tensor({features})),
      running_mean({features}),
      running_var({features}, 1.0) {}

Tensor BatchNorm::forward_train(const Tensor& x, BatchNormCache& cache) const {
  const std::size_t features = gamma.value.size();
  expect_shape(x, {x.dim(0), features}, gamma.name.c_str());
  const std::size_t n = x.dim(0);
  require(n >= 2, ErrorCode::domain, "batch norm in train mode needs a batch of at least 2");
  cache.mean.assign(features, 0.0);
  cache.var.assign(features, 0.0);
  cache.inv_std.assign(features, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < features; ++j) cache.mean[j] += x.at(i, j);
  for (double& m : cache.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < features; ++j) {
      const double c = x.at(i, j) - cache.mean[j];
      cache.var[j] += c * c;
    }
  for (std::size_t j = 0; j < features; ++j) {
    cache.var[j] /= static_cast<double>(n);
    cache.inv_std[j] = 1.0 / std::sqrt(cache.var[j] + kEpsilon);
  }
  cache.xhat = Tensor(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < features; ++j) {
      const double xh = (x.at(i, j) - cache.mean[j]) * cache.inv_std[j];
      cache.xhat.at(i, j) = xh;
      y.at(i, j) = xh * gamma.value[j] + beta.value[j];
    }
  return y;
}

Tensor BatchNorm::forward_infer(const Tensor& x) const {
  const std::size_t features = gamma.value.size();
  expect_shape(x, {x.dim(0), features}, gamma.name.c_str());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < features; ++j) {
      const double inv = 1.0 / std::sqrt(running_var[j] + kEpsilon);
      y.at(i, j) = (x.at(i, j) - running_mean[j]) * inv * gamma.value[j] + beta.value[j];
    }
  return y;
}

Tensor BatchNorm::backward(const BatchNormCache& cache, const Tensor& dy) {
  const std::size_t n = dy.dim(0), features = dy.dim(1);
  const double nd = static_cast<double>(n);
  Tensor dx(dy.shape());
  for (std::size_t j = 0; j < features; ++j) {
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = dy.at(i, j);
      gamma.grad[j] += g * cache.xhat.at(i, j);
      beta.grad[j] += g;
      const double dxhat = g * gamma.value[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * cache.xhat.at(i, j);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double dxhat = dy.at(i, j) * gamma.value[j];
      dx.at(i, j) = cache.inv_std[j] / nd *
                    (nd * dxhat - sum_dxhat - cache.xhat.at(i, j) * sum_dxhat_xhat);
    }
  }
  return dx;
}

void BatchNorm::update_running(const BatchNormCache& cache) {
  // Running variance tracks the unbiased batch estimate.
  const double n = cache.xhat.empty() ? 1.0 : static_cast<double>(cache.xhat.dim(0));
  const double correction = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t j = 0; j < cache.mean.size(); ++j) {
    running_mean[j] = (1.0 - kMomentum) * running_mean[j] + kMomentum * cache.mean[j];
    running_var[j] = (1.0 - kMomentum) * running_var[j] + kMomentum * cache.var[j] * correction;
  }
}

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng, DropoutMask& mask) {
  require(rate >= 0.0 && rate < 1.0, ErrorCode::config,
          "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  mask.scale.clear();
  if (mode == Mode::infer || rate == 0.0) return x;
  require(rng != nullptr, ErrorCode::config, "train-mode dropout needs a random stream");
  const double keep_scale = 1.0 / (1.0 - rate);
  mask.scale.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask.scale[i] = rng->uniform() < rate ? 0.0 : keep_scale;
    y[i] *= mask.scale[i];
  }
  return y;
}

Tensor dropout_backward(const DropoutMask& mask, const Tensor& dy) {
  if (mask.scale.empty()) return dy;
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask.scale[i];
  return dx;
}

Tensor maxpool2d_forward(const Tensor& x, std::size_t pool_h, std::size_t pool_w,
                         PoolCache* cache) {
  require(x.rank() == 4, ErrorCode::shape, "maxpool2d expects [batch, ch, h, w]");
  const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h >= pool_h && w >= pool_w, ErrorCode::shape,
          "maxpool2d: input " + shape_string(x.shape()) + " smaller than pool");
  const std::size_t oh = ceil_div(h, pool_h), ow = ceil_div(w, pool_w);
  Tensor y({batch, ch, oh, ow});
  if (cache) {
    cache->input_shape = x.shape();
    cache->argmax.assign(y.size(), 0);
  }
  std::size_t out_index = 0;
  for (std::size_t plane = 0; plane < batch * ch; ++plane) {
    const double* in = x.data() + plane * h * w;
    for (std::size_t oi = 0; oi < oh; ++oi) {
      for (std::size_t oj = 0; oj < ow; ++oj, ++out_index) {
        const std::size_t i_end = std::min(h, (oi + 1) * pool_h);
        const std::size_t j_end = std::min(w, (oj + 1) * pool_w);
        std::size_t best = oi * pool_h * w + oj * pool_w;
        double best_value = in[best];
        for (std::size_t i = oi * pool_h; i < i_end; ++i)
          for (std::size_t j = oj * pool_w; j < j_end; ++j) {
            // strict comparison keeps the first occurrence on ties
            if (in[i * w + j] > best_value) {
              best_value = in[i * w + j];
              best = i * w + j;
            }
          }
        y[out_index] = best_value;
        if (cache) cache->argmax[out_index] = static_cast<std::uint32_t>(plane * h * w + best);
      }
    }
  }
  return y;
}

Tensor maxpool2d_backward(const PoolCache& cache, const Tensor& dy) {
  Tensor dx(cache.input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.argmax[i]] += dy[i];
  return dx;
}

}  // namespace hf
