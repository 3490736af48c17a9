#pragma once

// Event-driven simulation of several queue-length processes driven by the
// same arrival clock (rate lambda) and the same two potential-service clocks
// (rate mu each). Service clocks tick whether or not the queue is busy, so
// the superposed event rate is the constant lambda + 2 mu and each event is a
// categorical draw; no per-state rate recomputation is needed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "jsq/jsq_model.hpp"
#include "jsq/markov_engine.hpp"
#include "jsq/params.hpp"
#include "jsq/state_space.hpp"

namespace jsq {

/// Seeded 64-bit stream. Replication streams are derived from (root seed,
/// replication index) only, so results do not depend on execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  [[nodiscard]] static Rng for_replication(std::uint64_t root_seed, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

enum class Discipline : std::uint8_t { jsq, product };
enum class EventKind : std::uint8_t { arrival, service1, service2 };

[[nodiscard]] const char* to_string(EventKind kind);

struct Replica {
  QueuePair state;
  Discipline discipline = Discipline::jsq;
};

class ReplicaSet {
 public:
  ReplicaSet(double lambda, double mu, std::vector<Replica> replicas);

  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] double mu() const { return mu_; }
  [[nodiscard]] double total_rate() const { return lambda_ + 2.0 * mu_; }
  [[nodiscard]] std::size_t size() const { return replicas_.size(); }
  [[nodiscard]] const Replica& operator[](std::size_t i) const { return replicas_[i]; }
  [[nodiscard]] std::span<const Replica> replicas() const { return replicas_; }
  [[nodiscard]] bool has_product_replica() const { return has_product_; }

  /// Applies one clock tick to every replica. `route_to_first` is the shared
  /// coin that splits arrivals for product-chain replicas; JSQ replicas route
  /// by jsq_target. A service tick on an empty queue changes nothing.
  void apply(EventKind kind, bool route_to_first = true);

 private:
  double lambda_;
  double mu_;
  std::vector<Replica> replicas_;
  bool has_product_ = false;
};

struct Event {
  double holding_time = 0.0;
  EventKind kind = EventKind::arrival;
};

/// Draws the next shared event and applies it in place.
Event step(ReplicaSet& replicas, Rng& rng);

enum class Termination : std::uint8_t { horizon, predicate };

/// Event-indexed record of every replica's post-event state.
class CoupledTrajectory {
 public:
  CoupledTrajectory() = default;
  explicit CoupledTrajectory(const ReplicaSet& initial);

  [[nodiscard]] std::size_t replica_count() const { return initial_.size(); }
  [[nodiscard]] std::size_t event_count() const { return times_.size(); }
  [[nodiscard]] const Replica& initial(std::size_t replica) const { return initial_[replica]; }
  [[nodiscard]] double time(std::size_t event) const { return times_[event]; }
  [[nodiscard]] EventKind kind(std::size_t event) const { return kinds_[event]; }
  [[nodiscard]] const QueuePair& state(std::size_t event, std::size_t replica) const {
    return states_[event * initial_.size() + replica];
  }
  /// State of `replica` just after `event`; event == npos means time zero.
  [[nodiscard]] QueuePair state_after(std::size_t event, std::size_t replica) const;

  Termination termination = Termination::horizon;

  void record(double time, EventKind kind, const ReplicaSet& replicas);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<Replica> initial_;
  std::vector<double> times_;
  std::vector<EventKind> kinds_;
  std::vector<QueuePair> states_;
};

using ReplicaPredicate = std::function<bool(const ReplicaSet&)>;

/// Runs until `max_events` events, simulated time `max_time`, or `stop`
/// returns true after an event (checked on the initial state too).
[[nodiscard]] CoupledTrajectory simulate(ReplicaSet replicas, Rng& rng,
                                         std::size_t max_events,
                                         double max_time = std::numeric_limits<double>::infinity(),
                                         const ReplicaPredicate& stop = {});

inline constexpr std::uint64_t kDefaultEventCap = 1'000'000'000;

/// First time a single process under `discipline` started at `start` enters
/// `target`. Throws SolveError when `event_cap` events pass without a hit.
[[nodiscard]] double sample_hitting_time(const SystemParams& params, Discipline discipline,
                                         const QueuePair& start,
                                         std::span<const QueuePair> target, Rng& rng,
                                         std::uint64_t event_cap = kDefaultEventCap);

/// First time a single JSQ process started at `start` enters `target`.
/// Throws SolveError when `event_cap` events pass without a hit.
[[nodiscard]] double sample_T_general(const SystemParams& params, const QueuePair& start,
                                      std::span<const QueuePair> target, Rng& rng,
                                      std::uint64_t event_cap = kDefaultEventCap);

/// (1,0) -> (0,0).
[[nodiscard]] double sample_T0(const SystemParams& params, Rng& rng,
                               std::uint64_t event_cap = kDefaultEventCap);
/// (1,1) -> {(0,1),(1,0)}.
[[nodiscard]] double sample_T1(const SystemParams& params, Rng& rng,
                               std::uint64_t event_cap = kDefaultEventCap);

/// Inverse-CDF sampler over a DistVec on [0,B]^2. Tail mass is assigned to
/// the last enumerated state (B,B).
class StationarySampler {
 public:
  StationarySampler(const DistVec& dist, const StateSpace& space);
  [[nodiscard]] QueuePair sample(Rng& rng) const;
  [[nodiscard]] double tail_mass() const { return tail_mass_; }

 private:
  StateSpace space_;
  std::vector<double> cumulative_;
  double tail_mass_ = 0.0;
};

/// Meeting time of two coupled JSQ copies, one from x and one from a
/// stationary draw. Zero if they start equal.
[[nodiscard]] double sample_meeting_time(const SystemParams& params, const QueuePair& x,
                                         const StationarySampler& stationary, Rng& rng,
                                         std::uint64_t event_cap = kDefaultEventCap);

/// Online check that `upper` dominates `lower` componentwise and that the
/// total gap r = sum_i (upper_i - lower_i) never increases.
class DominanceMonitor {
 public:
  DominanceMonitor(const QueuePair& upper, const QueuePair& lower);
  /// Returns false on the first violating observation.
  bool observe(const QueuePair& upper, const QueuePair& lower);
  [[nodiscard]] int gap() const { return gap_; }

 private:
  int gap_;
};

struct DominanceCheck {
  bool pass = true;
  std::optional<std::size_t> first_violation;  // event index
  std::size_t events_checked = 0;
};

/// Checks replica i >= replica j at every event plus monotone gap. Throws
/// std::invalid_argument("initial states not ordered") when the starts are
/// not ordered or either replica is not JSQ.
[[nodiscard]] DominanceCheck check_dominance(const CoupledTrajectory& trajectory,
                                             std::size_t i, std::size_t j);

struct DominanceSuiteResult {
  std::size_t pairs = 0;
  std::size_t events = 0;
  std::size_t dominance_violations = 0;
  std::size_t gap_violations = 0;
  std::size_t zero_implication_violations = 0;
  std::size_t coincidence_breaks = 0;  // equal replicas that later diverged
};

/// `pairs` coupled JSQ pairs with random ordered starts in [0, max_start]^2
/// (the upper start adds a random offset), `events` events each.
[[nodiscard]] DominanceSuiteResult run_dominance_suite(double lambda, double mu,
                                                       std::size_t pairs, std::size_t events,
                                                       int max_start, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Replication and statistics

struct HittingStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;    // unbiased sample variance
  double half_width = 0.0;  // 1.96 sqrt(variance / n)
  std::uint64_t seed = 0;

  [[nodiscard]] bool covers(double value) const {
    return value >= mean - half_width && value <= mean + half_width;
  }
};

[[nodiscard]] HittingStats summarize(std::span<const double> samples, std::uint64_t seed);

/// Draws samples[i] = draw(Rng::for_replication(seed, i)) for i < n.
template <class Draw>
[[nodiscard]] std::vector<double> replicate(std::size_t n, std::uint64_t seed, Draw&& draw) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::for_replication(seed, i);
    out[i] = static_cast<double>(draw(rng));
  }
  return out;
}

/// Wilson score upper limit for a binomial proportion.
[[nodiscard]] double wilson_upper(std::size_t successes, std::size_t n, double z);

struct KsResult {
  double statistic = 0.0;  // sup_x (F_larger(x) - F_smaller(x))
  double critical = 0.0;
  bool pass = true;        // no rejection of smaller <= larger
};

/// One-sided two-sample Kolmogorov-Smirnov test of the null hypothesis that
/// `smaller` is stochastically dominated by `larger`.
[[nodiscard]] KsResult ks_dominated(std::span<const double> smaller,
                                    std::span<const double> larger, double alpha);

/// q1 + q2 at each of `times` (non-decreasing) for one process started at x.
[[nodiscard]] std::vector<int> totals_on_grid(double lambda, double mu, const QueuePair& x,
                                              Discipline discipline,
                                              std::span<const double> times, Rng& rng);

struct RecursionCertificate {
  double t0_lhs = 0.0;       // E[T0]
  double t0_rhs = 0.0;       // 1/(l+m) + l/(l+m) (E[T1] + E[T0])
  double t0_relative_residual = 0.0;
  double t1_lhs = 0.0;       // E[T1]
  double t1_rhs = 0.0;       // 1/(l+2m) + l/(l+2m) (E[T1] + E[T0])
  double t1_margin = 0.0;
  bool pass = false;
};

/// Checks the first-step identity for E[T0] (relative tolerance 1e-6) and the
/// inequality for E[T1] against exact hitting times.
[[nodiscard]] RecursionCertificate recursion_certificate(const SystemParams& params,
                                                         const ExactHittingTimes& exact);

}  // namespace jsq
