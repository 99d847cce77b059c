#pragma once

#include <stdexcept>
#include <string>

namespace bdsde {

// Error taxonomy shared across the library. The CLI maps these to exit codes:
// usage/config problems -> 2, numeric failures -> 3.
enum class ErrorCode {
  invalid_argument,
  invalid_input,
  numeric_overflow,
  mesh_too_coarse,
  no_convergence,
  out_of_domain,
  unsupported_dimension,
  resource_limit,
  io_error,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::numeric_overflow: return "numeric-overflow";
    case ErrorCode::mesh_too_coarse: return "mesh-too-coarse";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::out_of_domain: return "out-of-domain";
    case ErrorCode::unsupported_dimension: return "unsupported-dimension";
    case ErrorCode::resource_limit: return "resource-limit";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace bdsde
