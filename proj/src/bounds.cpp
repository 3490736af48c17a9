#include "jsq/bounds.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "jsq/errors.hpp"

namespace jsq {

namespace {

// Stability check for the closed forms; lambda may be zero (the rho -> 0
// limit), mu must be positive.
double checked_rho(double lambda, double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be >= 0");
  const double rho = lambda / (2.0 * mu);
  if (rho >= 1.0) throw UnstableSystem();
  return rho;
}

void check_rho(double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be >= 0");
  if (rho >= 1.0) throw UnstableSystem();
}

void check_start(const QueuePair& x) {
  if (x.q1 < 0 || x.q2 < 0) throw std::invalid_argument("queue lengths must be >= 0");
}

double warn_if_infinite(double value, const char* what) {
  if (std::isinf(value))
    std::clog << "warning: " << what << " overflowed to +inf (rho too close to 1)\n";
  return value;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

double traffic_intensity(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0) || !std::isfinite(lambda) || !std::isfinite(mu))
    throw std::invalid_argument("traffic_intensity: lambda and mu must be > 0");
  return lambda / (2.0 * mu);
}

double c1_constant(double lambda, double mu, const QueuePair& x) {
  check_start(x);
  const double rho = checked_rho(lambda, mu);
  const double a = 1.0 - rho;
  const double value = (2.0 - rho) / (2.0 * mu * a * a * a) *
                       (double(x.total()) * a + rho * (2.0 - rho));
  return warn_if_infinite(value, "C1");
}

double k_factor(double rho) {
  check_rho(rho);
  if (rho >= kInvSqrt2) return 1.0;
  const double a = 1.0 - rho;
  const double candidate =
      (2.0 + 2.0 * rho) / (1.0 - 2.0 * rho * rho) * (a * a) / (2.0 - rho);
  return std::min(1.0, candidate);
}

double c1k_constant(double lambda, double mu, const QueuePair& x) {
  return c1_constant(lambda, mu, x) * k_factor(lambda / (2.0 * mu));
}

double tv_bound(double lambda, double mu, const QueuePair& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("tv_bound: t must be > 0");
  return c1k_constant(lambda, mu, x) / t;
}

double tv_bound_weak(double lambda, double mu, const QueuePair& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("tv_bound: t must be > 0");
  return c1_constant(lambda, mu, x) / t;
}

double c2_constant(double lambda, double mu, const QueuePair& x) {
  check_start(x);
  const double rho = checked_rho(lambda, mu);
  const double a = 1.0 - rho;
  const double x1 = x.q1;
  const double x2 = x.q2;
  const double value = (x1 * x1 + x2 * x2) + 2.0 * (x1 + x2) * rho / a +
                       4.0 * rho * (1.0 + rho) / (a * a);
  return warn_if_infinite(value, "C2");
}

MeanBounds mean_bounds(double lambda, double mu, const QueuePair& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("mean_bounds: t must be > 0");
  const double c1k = c1k_constant(lambda, mu, x);
  const double c2 = c2_constant(lambda, mu, x);
  MeanBounds b;
  b.diff = (2.0 * c1k + c2) / std::sqrt(t) + 2.0 * c1k / t;
  b.abs = stationary_mean_upper(lambda / (2.0 * mu)) + b.diff;
  return b;
}

T0Bounds t0_expectation_bounds(double lambda, double mu) {
  const double rho = checked_rho(lambda, mu);
  if (!(lambda > 0.0)) throw std::invalid_argument("t0 bounds: lambda must be > 0");
  T0Bounds b;
  const double a = 1.0 - rho;
  b.general = warn_if_infinite(rho * (2.0 - rho) / (a * a) / lambda, "E[T0] bound");
  if (rho < kInvSqrt2) b.light = (lambda + 2.0 * mu) / (2.0 * mu * mu - lambda * lambda);
  b.best = b.light ? std::min(b.general, *b.light) : b.general;
  return b;
}

std::optional<double> t1_expectation_bound(double lambda, double mu) {
  checked_rho(lambda, mu);
  if (lambda / (2.0 * mu) >= kInvSqrt2) return std::nullopt;
  const double denom = 2.0 * mu * mu - lambda * lambda;
  if (!(denom > 0.0)) return std::nullopt;
  return (lambda + mu) / denom;
}

Mm1ClosedForms mm1_closed_forms(double lambda_total, double rho, int x) {
  check_rho(rho);
  if (!(rho > 0.0)) throw std::invalid_argument("mm1_closed_forms: rho must be > 0");
  if (!(lambda_total > 0.0)) throw std::invalid_argument("mm1_closed_forms: lambda must be > 0");
  if (x < 0) throw std::invalid_argument("mm1_closed_forms: x must be >= 0");
  const double a = 1.0 - rho;
  Mm1ClosedForms f;
  f.return_time_00 = 1.0 / (lambda_total * a * a);
  f.hit_from_10 = rho * (2.0 - rho) / (a * a) / lambda_total;
  f.stationary_mean = rho / a;
  f.stationary_second_moment = rho * (1.0 + rho) / (a * a);
  f.transient_second_moment_upper =
      double(x) * x + 2.0 * x * rho / a + f.stationary_second_moment;
  return f;
}

double stationary_mean_upper(double rho) {
  check_rho(rho);
  return rho * (2.0 - rho) / (1.0 - rho);
}

Certificate certify(std::string name, double lhs, double rhs, double tolerance) {
  Certificate c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.margin = rhs - lhs;
  c.pass = lhs <= rhs + tolerance;
  return c;
}

BoundReport bound_report(double lambda, double mu, const QueuePair& x) {
  BoundReport r;
  r.rho = checked_rho(lambda, mu);
  r.c1 = c1_constant(lambda, mu, x);
  r.k = k_factor(r.rho);
  r.c1k = r.c1 * r.k;
  r.c2 = c2_constant(lambda, mu, x);
  const T0Bounds t0 = t0_expectation_bounds(lambda, mu);
  r.e_t0_general = t0.general;
  r.e_t0_light = t0.light;
  r.e_t1_light = t1_expectation_bound(lambda, mu);
  r.stationary_mean_upper = stationary_mean_upper(r.rho);
  const Mm1ClosedForms mm1 = mm1_closed_forms(lambda, r.rho, 0);
  r.mm1_return_time = mm1.return_time_00;
  r.mm1_hit_from_10 = mm1.hit_from_10;
  return r;
}

}  // namespace jsq
