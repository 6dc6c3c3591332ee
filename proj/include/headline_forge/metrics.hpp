#pragma once

#include "headline_forge/tensor.hpp"

namespace hf {

// Mean absolute error over all entries of two [n, k] matrices.
double mae(const Tensor& preds, const Tensor& truths);

// Total absolute error relative to predicting each column's mean truth,
// as a percentage. Needs n >= 2 and non-constant truth columns.
double rae(const Tensor& preds, const Tensor& truths);

// Every row is the column mean of `truths`.
Tensor mean_predictor(const Tensor& truths);

}  // namespace hf
