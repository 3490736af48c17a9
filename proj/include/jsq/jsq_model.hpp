#pragma once

// Concrete chains on [0,B]^2: the two-server JSQ system and the comparison
// chain made of two independent M/M/1 queues fed at rate lambda/2 each.

#include <cstddef>
#include <vector>

#include "jsq/markov_engine.hpp"
#include "jsq/params.hpp"
#include "jsq/state_space.hpp"

namespace jsq {

/// Server (1 or 2) that receives an arrival in state q: the strictly shorter
/// queue, queue 1 on ties.
[[nodiscard]] constexpr int jsq_target(const QueuePair& q) {
  return q.q2 < q.q1 ? 2 : 1;
}

/// JSQ generator on [0,B]^2. Arrivals that would leave the box are booked as
/// loss; departures are never blocked.
[[nodiscard]] Generator jsq_generator(const SystemParams& params);

/// Two independent M/M/1 queues, arrival rate lambda/2 and service rate mu
/// each, on [0,B]^2 with the same boundary convention as jsq_generator.
[[nodiscard]] Generator mm1_product_generator(const SystemParams& params);

/// Single M/M/1 birth-death chain on {0..B}; arrivals at B are lost.
[[nodiscard]] Generator mm1_generator(double arrival, double service, int buffer);

/// Truncated geometric law: P(k) proportional to u^k on {0..B}, tail_mass =
/// u^(B+1), i.e. the untruncated geometric(1-u) law restricted to the box.
[[nodiscard]] DistVec mm1_geometric_stationary(double utilization, int buffer);

/// Product of two mm1_geometric_stationary laws on [0,B]^2.
[[nodiscard]] DistVec product_geometric_stationary(double utilization, int buffer);

// Moments over the enumerated part of a distribution on [0,B]^2.
[[nodiscard]] double mean_total(const DistVec& dist, const StateSpace& space);
[[nodiscard]] double mean_sum_of_squares(const DistVec& dist, const StateSpace& space);

// Moments of a distribution on {0..B}.
[[nodiscard]] double mean_1d(const DistVec& dist);
[[nodiscard]] double second_moment_1d(const DistVec& dist);

/// max_{a,b} |pi(a,b) - pi(b,a)|.
[[nodiscard]] double swap_asymmetry(const DistVec& dist, const StateSpace& space);

/// Default buffer for (params, start): the smallest B whose stationary tail
/// bound is below `tail_target`, raised to keep the start well inside the box.
/// Returns -1 when the tail target would need more than kMaxBuffer.
[[nodiscard]] int default_buffer(double rho, const QueuePair& start,
                                 double tail_target = kDefaultTailTarget);

/// Exact (truncated) expected hitting times used throughout the checks.
struct ExactHittingTimes {
  int buffer = 0;
  double t0 = 0.0;               // JSQ, (1,0) -> {(0,0)}
  double t1 = 0.0;               // JSQ, (1,1) -> {(1,0),(0,1)}
  double t11_to_origin = 0.0;    // JSQ, (1,1) -> {(0,0)}
  double product_10_to_origin = 0.0;  // product chain, (1,0) -> {(0,0)}
  double product_return_00 = 0.0;     // 1 / (pi(0,0) nu(0,0)) on the product chain
};

[[nodiscard]] ExactHittingTimes exact_hitting_times(const SystemParams& params);

/// JSQ expected hitting time of {(0,0)} from every state, indexed by
/// StateSpace(params.buffer).
[[nodiscard]] HittingSolve jsq_hitting_to_origin(const SystemParams& params);

}  // namespace jsq
