#include "headline_forge/metrics.hpp"

#include <cmath>

#include "headline_forge/error.hpp"

namespace hf {

namespace {

void check_pair(const Tensor& preds, const Tensor& truths) {
  require(preds.rank() == 2 && preds.same_shape(truths), ErrorCode::shape,
          "metric inputs differ: " + shape_string(preds.shape()) + " vs " + shape_string(truths.shape()));
  require(preds.dim(0) >= 1, ErrorCode::shape, "metric needs at least one row");
}

}  // namespace

double mae(const Tensor& preds, const Tensor& truths) {
  check_pair(preds, truths);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += std::abs(preds[i] - truths[i]);
  return total / static_cast<double>(preds.size());
}

Tensor mean_predictor(const Tensor& truths) {
  require(truths.rank() == 2 && truths.dim(0) >= 1, ErrorCode::shape, "mean predictor needs rows");
  const std::size_t n = truths.dim(0), k = truths.dim(1);
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) mean[j] += truths.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Tensor out(truths.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = mean[j];
  return out;
}

double rae(const Tensor& preds, const Tensor& truths) {
  check_pair(preds, truths);
  require(preds.dim(0) >= 2, ErrorCode::domain, "RAE needs at least two rows");
  Tensor base = mean_predictor(truths);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    num += std::abs(truths[i] - preds[i]);
    den += std::abs(truths[i] - base[i]);
  }
  require(den > 0.0, ErrorCode::domain, "RAE undefined: every truth column is constant");
  return 100.0 * num / den;
}

}  // namespace hf
