#pragma once

#include <stdexcept>
#include <string>

namespace chitbl {

// Numeric values are part of the C API (see chitbl.h) and must stay stable.
enum class ErrorCode : int {
  ok = 0,
  invalid_argument = 1,
  out_of_range = 2,
  no_convergence = 3,
  numerical_failure = 4,
  io = 5,
  bad_format = 6,
  version_mismatch = 7,
  truncated = 8,
  invariant_violation = 9,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace chitbl
