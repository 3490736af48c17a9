#pragma once

namespace jsq {

/// Two-server system parameters. `buffer` is the truncation level B used
/// whenever the countable state space has to be boxed to [0,B]^2.
struct SystemParams {
  double lambda = 1.0;
  double mu = 1.0;
  int buffer = 1;

  /// Traffic intensity lambda / (2 mu).
  [[nodiscard]] double rho() const { return lambda / (2.0 * mu); }

  /// Throws std::invalid_argument on non-finite or non-positive rates, or
  /// B < 1. lambda == 0 is accepted (the no-arrival limit).
  void validate() const;

  /// validate() plus rho < 1; throws UnstableSystem otherwise.
  void require_stable() const;
};

}  // namespace jsq
