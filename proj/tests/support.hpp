#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "headline_forge/gradcheck.hpp"
#include "headline_forge/layers.hpp"
#include "headline_forge/rng.hpp"
#include "headline_forge/tensor.hpp"

namespace hf::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Scalar probe sum(w * y); its gradient with respect to y is w.
inline double probe(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

inline std::vector<GradTarget> targets_of(std::vector<Param*> params) {
  std::vector<GradTarget> out;
  for (Param* p : params) out.push_back({p->name, &p->value, p->grad});
  return out;
}

inline void zero(std::vector<Param*> params) {
  for (Param* p : params) p->zero_grad();
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace hf::testing
