#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hf {

enum class ErrorCode {
  io,
  config,
  domain,
  shape,
  parse,
  nondeterministic,
  diverged,
  request,
  checkpoint_format,
  checkpoint_version,
  checkpoint_truncated,
  checkpoint_shape,
  checkpoint_corrupt,
  model_mismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace hf
