#include "jsq/jsq_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "jsq/errors.hpp"

namespace jsq {

void SystemParams::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::invalid_argument("lambda must be finite and >= 0");
  if (!std::isfinite(mu) || mu <= 0.0)
    throw std::invalid_argument("mu must be finite and > 0");
  if (buffer < 1) throw std::invalid_argument("buffer B must be >= 1");
}

void SystemParams::require_stable() const {
  validate();
  if (rho() >= 1.0) throw UnstableSystem();
}

namespace {

QueuePair with_arrival(QueuePair q, int server) {
  (server == 1 ? q.q1 : q.q2) += 1;
  return q;
}

void add_departures(Generator::Builder& builder, const StateSpace& space,
                    std::size_t i, const QueuePair& q, double mu) {
  if (q.q1 > 0) builder.add(i, space.index({q.q1 - 1, q.q2}), mu);
  if (q.q2 > 0) builder.add(i, space.index({q.q1, q.q2 - 1}), mu);
}

void add_arrival(Generator::Builder& builder, const StateSpace& space,
                 std::size_t i, const QueuePair& next, double rate) {
  if (space.contains(next)) {
    builder.add(i, space.index(next), rate);
  } else {
    builder.add_loss(i, rate);
  }
}

}  // namespace

Generator jsq_generator(const SystemParams& params) {
  params.validate();
  const StateSpace space(params.buffer);
  Generator::Builder builder(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const QueuePair q = space.state(i);
    add_departures(builder, space, i, q, params.mu);
    add_arrival(builder, space, i, with_arrival(q, jsq_target(q)), params.lambda);
  }
  return std::move(builder).build();
}

Generator mm1_product_generator(const SystemParams& params) {
  params.validate();
  const StateSpace space(params.buffer);
  const double half = 0.5 * params.lambda;
  Generator::Builder builder(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const QueuePair q = space.state(i);
    add_departures(builder, space, i, q, params.mu);
    add_arrival(builder, space, i, with_arrival(q, 1), half);
    add_arrival(builder, space, i, with_arrival(q, 2), half);
  }
  return std::move(builder).build();
}

Generator mm1_generator(double arrival, double service, int buffer) {
  if (!(arrival >= 0.0) || !(service > 0.0) || !std::isfinite(arrival) ||
      !std::isfinite(service))
    throw std::invalid_argument("mm1_generator: rates must be finite, service > 0");
  if (buffer < 1) throw std::invalid_argument("buffer B must be >= 1");
  const auto n = static_cast<std::size_t>(buffer) + 1;
  Generator::Builder builder(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) builder.add(k, k - 1, service);
    if (k + 1 < n) {
      builder.add(k, k + 1, arrival);
    } else {
      builder.add_loss(k, arrival);
    }
  }
  return std::move(builder).build();
}

DistVec mm1_geometric_stationary(double utilization, int buffer) {
  if (!(utilization > 0.0 && utilization < 1.0))
    throw std::invalid_argument("utilization must lie in (0,1)");
  if (buffer < 0) throw std::invalid_argument("negative buffer");
  DistVec d;
  d.prob.resize(static_cast<std::size_t>(buffer) + 1);
  double power = 1.0;
  for (double& p : d.prob) {
    p = (1.0 - utilization) * power;
    power *= utilization;
  }
  d.tail_mass = std::pow(utilization, buffer + 1);
  return d;
}

DistVec product_geometric_stationary(double utilization, int buffer) {
  const DistVec marginal = mm1_geometric_stationary(utilization, buffer);
  const StateSpace space(buffer);
  DistVec d;
  d.prob.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const QueuePair q = space.state(i);
    d.prob[i] = marginal.prob[static_cast<std::size_t>(q.q1)] *
                marginal.prob[static_cast<std::size_t>(q.q2)];
  }
  const double inside = 1.0 - marginal.tail_mass;
  d.tail_mass = 1.0 - inside * inside;
  return d;
}

double mean_total(const DistVec& dist, const StateSpace& space) {
  if (dist.size() != space.size()) throw std::invalid_argument("mean_total: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) m += dist.prob[i] * space.state(i).total();
  return m;
}

double mean_sum_of_squares(const DistVec& dist, const StateSpace& space) {
  if (dist.size() != space.size())
    throw std::invalid_argument("mean_sum_of_squares: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const QueuePair q = space.state(i);
    m += dist.prob[i] * (double(q.q1) * q.q1 + double(q.q2) * q.q2);
  }
  return m;
}

double mean_1d(const DistVec& dist) {
  double m = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) m += dist.prob[k] * double(k);
  return m;
}

double second_moment_1d(const DistVec& dist) {
  double m = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) m += dist.prob[k] * double(k) * double(k);
  return m;
}

double swap_asymmetry(const DistVec& dist, const StateSpace& space) {
  if (dist.size() != space.size())
    throw std::invalid_argument("swap_asymmetry: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const QueuePair q = space.state(i);
    const std::size_t j = space.index({q.q2, q.q1});
    worst = std::max(worst, std::abs(dist.prob[i] - dist.prob[j]));
  }
  return worst;
}

int default_buffer(double rho, const QueuePair& start, double tail_target) {
  if (rho >= 1.0) throw UnstableSystem();
  const int by_tail = smallest_buffer(rho, tail_target, kMaxBuffer);
  if (by_tail < 0) return -1;
  const int by_start = 2 * std::max(start.q1, start.q2) + 10;
  return std::min(kMaxBuffer, std::max(by_tail, by_start));
}

HittingSolve jsq_hitting_to_origin(const SystemParams& params) {
  params.require_stable();
  const StateSpace space(params.buffer);
  const std::array<std::size_t, 1> origin{space.index({0, 0})};
  return expected_hitting_time(jsq_generator(params), origin);
}

ExactHittingTimes exact_hitting_times(const SystemParams& params) {
  params.require_stable();
  if (params.lambda <= 0.0) throw std::invalid_argument("exact_hitting_times: lambda must be > 0");
  const StateSpace space(params.buffer);
  const std::size_t origin = space.index({0, 0});
  const std::size_t s10 = space.index({1, 0});
  const std::size_t s01 = space.index({0, 1});
  const std::size_t s11 = space.index({1, 1});

  ExactHittingTimes out;
  out.buffer = params.buffer;

  const Generator jsq = jsq_generator(params);
  const std::array<std::size_t, 1> to_origin{origin};
  const HittingSolve h0 = expected_hitting_time(jsq, to_origin);
  out.t0 = h0.expected[s10];
  out.t11_to_origin = h0.expected[s11];
  const std::array<std::size_t, 2> level_one{s10, s01};
  out.t1 = expected_hitting_time(jsq, level_one).expected[s11];

  const Generator product = mm1_product_generator(params);
  out.product_10_to_origin = expected_hitting_time(product, to_origin).expected[s10];
  const DistVec pi = stationary_distribution(product);
  out.product_return_00 = 1.0 / (pi.prob[origin] * -product.diagonal(origin));
  return out;
}

}  // namespace jsq
