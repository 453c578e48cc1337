#pragma once

#include <stdexcept>
#include <string>

namespace fibertrace {

enum class ErrorCode {
  Schema,              // malformed or invalid network description
  DimensionMismatch,   // vector/matrix size does not match the network
  InvalidRange,        // layer indices out of order or outside 1..n
  InvalidArgument,     // other precondition violations (eps <= 0, bad tol, ...)
  EmptyKernel,         // metric kernel is trivial, no null direction exists
  AmbiguousDirection,  // kernel dimension > 1 and no combination given
  StepRejected,        // kernel dimension changed within an integration step
  NoConvergence,       // iterative refinement exhausted its budget
  NonSpdMetric,        // output metric is not symmetric positive definite
  EmptyCurve,          // polyline with fewer than two vertices
  Io,                  // file could not be read or written
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace fibertrace
