#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "headline_forge/tensor.hpp"

namespace hf {

// One tensor whose analytic gradient is to be verified. `value` is perturbed
// in place during the check and restored afterwards.
struct GradTarget {
  std::string name;
  Tensor* value = nullptr;
  Tensor analytic;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so coordinates with vanishing
  // gradients are compared on an absolute scale.
  double abs_floor = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 1;
  // Skip coordinates whose one-sided differences disagree, i.e. where the
  // perturbation straddles a ReLU or max-pool kink.
  bool skip_kinks = false;
  double kink_tolerance = 1e-3;
};

struct GradCheckReport {
  bool passed = true;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  std::string worst;
  std::vector<std::string> failures;
};

// `loss` evaluates the scalar objective at the current tensor values; it must
// be deterministic (ErrorCode::nondeterministic otherwise). `analytic` runs
// forward + backward at the current values and returns the tensors to check
// with their analytic gradients. Central differences in 64-bit.
GradCheckReport gradient_check(const std::function<double()>& loss,
                               const std::function<std::vector<GradTarget>()>& analytic,
                               const GradCheckOptions& options = {});

}  // namespace hf
