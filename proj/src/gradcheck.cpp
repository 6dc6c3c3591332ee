#include "headline_forge/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

namespace {

std::vector<std::size_t> pick_coordinates(std::size_t size, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (limit == 0 || limit >= size) return all;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
    std::swap(all[i], all[j]);
  }
  all.resize(limit);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradCheckReport gradient_check(const std::function<double()>& loss,
                               const std::function<std::vector<GradTarget>()>& analytic,
                               const GradCheckOptions& options) {
  std::vector<GradTarget> targets = analytic();
  const double base = loss();
  const double again = loss();
  if (base != again) {
    fail(ErrorCode::nondeterministic,
         "gradient_check: objective is not deterministic (" + std::to_string(base) + " vs " +
             std::to_string(again) + ")");
  }

  GradCheckReport report;
  Rng rng(options.seed);
  const double h = options.step;
  for (GradTarget& target : targets) {
    require(target.value != nullptr && target.analytic.size() == target.value->size(),
            ErrorCode::shape, "gradient_check: analytic gradient shape mismatch for " + target.name);
    for (std::size_t i : pick_coordinates(target.value->size(), options.max_coords_per_tensor, rng)) {
      double& x = (*target.value)[i];
      const double saved = x;
      x = saved + h;
      const double up = loss();
      x = saved - h;
      const double down = loss();
      x = saved;

      if (options.skip_kinks) {
        const double fwd = (up - base) / h;
        const double bwd = (base - down) / h;
        const double scale = std::max({std::abs(fwd), std::abs(bwd), options.abs_floor});
        if (std::abs(fwd - bwd) > options.kink_tolerance * scale) {
          ++report.skipped;
          continue;
        }
      }

      const double numeric = (up - down) / (2.0 * h);
      const double a = target.analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        std::ostringstream where;
        where << target.name << '[' << i << "] analytic=" << a << " numeric=" << numeric;
        report.worst = where.str();
      }
      if (!(rel < options.tolerance)) {
        report.passed = false;
        if (report.failures.size() < 10) {
          std::ostringstream msg;
          msg << target.name << '[' << i << "] analytic=" << a << " numeric=" << numeric
              << " rel=" << rel;
          report.failures.push_back(msg.str());
        }
      }
    }
  }
  return report;
}

}  // namespace hf
