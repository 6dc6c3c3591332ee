#include "headline_forge/rng.hpp"

#include <cmath>
#include <limits>

#include "headline_forge/error.hpp"

namespace hf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io_error";
    case ErrorCode::config: return "config_error";
    case ErrorCode::domain: return "domain_error";
    case ErrorCode::shape: return "shape_mismatch";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::nondeterministic: return "nondeterministic_operator";
    case ErrorCode::diverged: return "training_diverged";
    case ErrorCode::request: return "bad_request";
    case ErrorCode::checkpoint_format: return "checkpoint_format";
    case ErrorCode::checkpoint_version: return "checkpoint_version";
    case ErrorCode::checkpoint_truncated: return "checkpoint_truncated";
    case ErrorCode::checkpoint_shape: return "checkpoint_shape";
    case ErrorCode::checkpoint_corrupt: return "checkpoint_corrupt";
    case ErrorCode::model_mismatch: return "model_mismatch";
  }
  return "unknown";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  // splitmix64 finalizer over (seed, hash(stream))
  std::uint64_t z = seed ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller, one draw per call.
  const double u1 = uniform_open_zero();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace hf
