#pragma once

#include <stdexcept>
#include <string>

namespace taxflow {

/// Failure categories shared by the C++ core, the C API and the CLI exit codes.
enum class ErrorCode {
  InvalidArgument = 1,
  Validation = 2,
  PropertyViolation = 3,
  BudgetExceeded = 4,
  Runtime = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace taxflow
