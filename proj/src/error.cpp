#include "chitbl/error.hpp"

namespace chitbl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::no_convergence: return "no convergence";
    case ErrorCode::numerical_failure: return "numerical failure";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_format: return "bad format";
    case ErrorCode::version_mismatch: return "version mismatch";
    case ErrorCode::truncated: return "truncated input";
    case ErrorCode::invariant_violation: return "invariant violation";
  }
  return "unknown";
}

}  // namespace chitbl
