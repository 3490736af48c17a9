#pragma once

#include <stdexcept>
#include <string>

namespace jsq {

/// Raised when an operation needs rho < 1 and the parameters violate it.
class UnstableSystem : public std::domain_error {
 public:
  explicit UnstableSystem(const std::string& detail = {})
      : std::domain_error(detail.empty() ? "unstable system"
                                         : "unstable system: " + detail) {}
};

/// Numerical failure: singular system, non-convergence, or an exhausted
/// simulation horizon.
class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jsq
