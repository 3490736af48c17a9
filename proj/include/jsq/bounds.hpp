#pragma once

// Closed-form constants and inequalities for the two-server JSQ system:
// the 1/t total-variation bound and its K(rho) refinement, the mean
// queue-length bounds, the E[T0]/E[T1] hitting-time bounds and the M/M/1
// formulas they are built from.
//
// rho always denotes lambda / (2 mu). Light-traffic bounds are only defined
// for rho < 1/sqrt(2) and are returned as std::nullopt otherwise.

#include <optional>
#include <string>
#include <vector>

#include "jsq/state_space.hpp"

namespace jsq {

/// lambda / (2 mu). Throws std::invalid_argument unless both are positive.
/// The result may be >= 1; check with is_stable().
[[nodiscard]] double traffic_intensity(double lambda, double mu);
[[nodiscard]] constexpr bool is_stable(double rho) { return rho >= 0.0 && rho < 1.0; }

/// (2-rho) / (2 mu (1-rho)^3) * ((x1+x2)(1-rho) + rho(2-rho)).
[[nodiscard]] double c1_constant(double lambda, double mu, const QueuePair& x);

/// K(rho): 1 on [1/sqrt(2), 1), otherwise
/// min{1, (2+2rho)/(1-2rho^2) * (1-rho)^2/(2-rho)}.
[[nodiscard]] double k_factor(double rho);

[[nodiscard]] double c1k_constant(double lambda, double mu, const QueuePair& x);

/// C1 K / t, the bound on TV(P^t_x, pi).
[[nodiscard]] double tv_bound(double lambda, double mu, const QueuePair& x, double t);
/// C1 / t, the weaker form.
[[nodiscard]] double tv_bound_weak(double lambda, double mu, const QueuePair& x, double t);

/// (x1^2 + x2^2) + 2(x1+x2) rho/(1-rho) + 4 rho(1+rho)/(1-rho)^2.
[[nodiscard]] double c2_constant(double lambda, double mu, const QueuePair& x);

struct MeanBounds {
  double diff = 0.0;  // |E[q1(t)+q2(t)] - E_pi[q1+q2]| <= diff
  double abs = 0.0;   // E[q1(t)+q2(t)] <= abs
};

[[nodiscard]] MeanBounds mean_bounds(double lambda, double mu, const QueuePair& x,
                                     double t);

struct T0Bounds {
  double general = 0.0;         // (1/lambda) rho(2-rho)/(1-rho)^2
  std::optional<double> light;  // (lambda+2mu)/(2mu^2-lambda^2), rho < 1/sqrt(2)
  double best = 0.0;
};

[[nodiscard]] T0Bounds t0_expectation_bounds(double lambda, double mu);

/// (lambda+mu)/(2mu^2-lambda^2) when 2mu^2 > lambda^2.
[[nodiscard]] std::optional<double> t1_expectation_bound(double lambda, double mu);

struct Mm1ClosedForms {
  double return_time_00 = 0.0;   // 1/(lambda (1-rho)^2), product chain
  double hit_from_10 = 0.0;      // (1/lambda) rho(2-rho)/(1-rho)^2
  double stationary_mean = 0.0;  // rho/(1-rho), one queue
  double stationary_second_moment = 0.0;          // rho(1+rho)/(1-rho)^2
  double transient_second_moment_upper = 0.0;     // x^2 + 2x rho/(1-rho) + ...
};

/// `lambda_total` feeds both queues (lambda/2 each); `rho` is the per-queue
/// utilization; `x` the start of a single queue for the transient bound.
[[nodiscard]] Mm1ClosedForms mm1_closed_forms(double lambda_total, double rho, int x);

/// rho(2-rho)/(1-rho), bound on the JSQ stationary mean of q1+q2.
[[nodiscard]] double stationary_mean_upper(double rho);

/// One certified inequality lhs <= rhs + tolerance.
struct Certificate {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  bool pass = false;
};

[[nodiscard]] Certificate certify(std::string name, double lhs, double rhs,
                                  double tolerance = 0.0);

struct BoundReport {
  double rho = 0.0;
  double c1 = 0.0;
  double k = 0.0;
  double c1k = 0.0;
  double c2 = 0.0;
  double e_t0_general = 0.0;
  std::optional<double> e_t0_light;
  std::optional<double> e_t1_light;
  double stationary_mean_upper = 0.0;
  double mm1_return_time = 0.0;
  double mm1_hit_from_10 = 0.0;
  std::vector<Certificate> certificates;
};

/// Evaluates every constant for (lambda, mu, x). Certificates start empty;
/// callers append the checks they run against exact values.
[[nodiscard]] BoundReport bound_report(double lambda, double mu, const QueuePair& x);

}  // namespace jsq
