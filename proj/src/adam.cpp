#include "headline_forge/adam.hpp"

#include <cmath>

#include "headline_forge/error.hpp"

namespace hf {

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.push_back(Tensor::zeros_like(p->value));
      v_.push_back(Tensor::zeros_like(p->value));
    }
  }
  require(m_.size() == params.size(), ErrorCode::shape,
          "adam: parameter list changed between steps");
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    require(p.grad.same_shape(m_[k]), ErrorCode::shape, "adam: shape drift for " + p.name);
    double* m = m_[k].data();
    double* v = v_[k].data();
    double* theta = p.value.data();
    const double* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace hf
