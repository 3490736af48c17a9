#include "jsq/coupled_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "jsq/errors.hpp"

namespace jsq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

EventKind draw_kind(Rng& rng, double lambda, double mu) {
  const double u = rng.uniform() * (lambda + 2.0 * mu);
  if (u < lambda) return EventKind::arrival;
  return u < lambda + mu ? EventKind::service1 : EventKind::service2;
}

void apply_to(QueuePair& q, Discipline discipline, EventKind kind, bool route_to_first) {
  switch (kind) {
    case EventKind::arrival: {
      const int server =
          discipline == Discipline::jsq ? jsq_target(q) : (route_to_first ? 1 : 2);
      (server == 1 ? q.q1 : q.q2) += 1;
      break;
    }
    case EventKind::service1:
      if (q.q1 > 0) --q.q1;
      break;
    case EventKind::service2:
      if (q.q2 > 0) --q.q2;
      break;
  }
}

void check_rates(double lambda, double mu) {
  if (!(lambda >= 0.0) || !(mu > 0.0) || !std::isfinite(lambda) || !std::isfinite(mu))
    throw std::invalid_argument("simulation: need lambda >= 0 and mu > 0");
}

[[noreturn]] void horizon_exceeded(const char* what, std::uint64_t events, double time,
                                   const QueuePair& state) {
  std::ostringstream os;
  os << what << ": no hit after " << events << " events (t = " << time
     << ", current state " << state << ")";
  throw SolveError(os.str());
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::for_replication(std::uint64_t root_seed, std::uint64_t index) {
  return Rng(root_seed ^ splitmix64(index ^ 0xD1B54A32D192ED03ULL));
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::arrival:
      return "arrival";
    case EventKind::service1:
      return "service-1";
    case EventKind::service2:
      return "service-2";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Replicas

ReplicaSet::ReplicaSet(double lambda, double mu, std::vector<Replica> replicas)
    : lambda_(lambda), mu_(mu), replicas_(std::move(replicas)) {
  check_rates(lambda, mu);
  for (const auto& r : replicas_) {
    if (r.state.q1 < 0 || r.state.q2 < 0)
      throw std::invalid_argument("ReplicaSet: negative queue length");
    has_product_ = has_product_ || r.discipline == Discipline::product;
  }
}

void ReplicaSet::apply(EventKind kind, bool route_to_first) {
  for (auto& r : replicas_) apply_to(r.state, r.discipline, kind, route_to_first);
}

namespace {

EventKind apply_drawn_event(ReplicaSet& replicas, Rng& rng) {
  const EventKind kind = draw_kind(rng, replicas.lambda(), replicas.mu());
  bool route_to_first = true;
  if (kind == EventKind::arrival && replicas.has_product_replica())
    route_to_first = rng.uniform() < 0.5;
  replicas.apply(kind, route_to_first);
  return kind;
}

}  // namespace

Event step(ReplicaSet& replicas, Rng& rng) {
  Event e;
  e.holding_time = rng.exponential(replicas.total_rate());
  e.kind = apply_drawn_event(replicas, rng);
  return e;
}

CoupledTrajectory::CoupledTrajectory(const ReplicaSet& initial)
    : initial_(initial.replicas().begin(), initial.replicas().end()) {}

QueuePair CoupledTrajectory::state_after(std::size_t event, std::size_t replica) const {
  return event == npos ? initial_[replica].state : state(event, replica);
}

void CoupledTrajectory::record(double time, EventKind kind, const ReplicaSet& replicas) {
  if (!times_.empty() && !(time > times_.back()))
    throw std::logic_error("CoupledTrajectory: event times must increase");
  times_.push_back(time);
  kinds_.push_back(kind);
  for (const auto& r : replicas.replicas()) states_.push_back(r.state);
}

CoupledTrajectory simulate(ReplicaSet replicas, Rng& rng, std::size_t max_events,
                           double max_time, const ReplicaPredicate& stop) {
  CoupledTrajectory trajectory(replicas);
  if (stop && stop(replicas)) {
    trajectory.termination = Termination::predicate;
    return trajectory;
  }
  double now = 0.0;
  for (std::size_t k = 0; k < max_events; ++k) {
    double next = now + rng.exponential(replicas.total_rate());
    if (next > max_time) break;
    // Keep event times strictly increasing even if a holding time rounds to 0.
    if (!(next > now)) next = std::nextafter(now, std::numeric_limits<double>::infinity());
    now = next;
    const EventKind kind = apply_drawn_event(replicas, rng);
    trajectory.record(now, kind, replicas);
    if (stop && stop(replicas)) {
      trajectory.termination = Termination::predicate;
      return trajectory;
    }
  }
  trajectory.termination = Termination::horizon;
  return trajectory;
}

// ---------------------------------------------------------------------------
// Hitting times

double sample_hitting_time(const SystemParams& params, Discipline discipline,
                           const QueuePair& start, std::span<const QueuePair> target,
                           Rng& rng, std::uint64_t event_cap) {
  check_rates(params.lambda, params.mu);
  if (params.rho() >= 1.0) throw UnstableSystem();
  if (target.empty()) throw std::invalid_argument("sample_hitting_time: empty target");
  auto hit = [&](const QueuePair& q) {
    return std::find(target.begin(), target.end(), q) != target.end();
  };
  QueuePair q = start;
  if (hit(q)) return 0.0;
  const double rate = params.lambda + 2.0 * params.mu;
  double t = 0.0;
  for (std::uint64_t k = 0; k < event_cap; ++k) {
    t += rng.exponential(rate);
    const EventKind kind = draw_kind(rng, params.lambda, params.mu);
    bool route_to_first = true;
    if (kind == EventKind::arrival && discipline == Discipline::product)
      route_to_first = rng.uniform() < 0.5;
    apply_to(q, discipline, kind, route_to_first);
    if (hit(q)) return t;
  }
  horizon_exceeded("sample_hitting_time", event_cap, t, q);
}

double sample_T_general(const SystemParams& params, const QueuePair& start,
                        std::span<const QueuePair> target, Rng& rng,
                        std::uint64_t event_cap) {
  return sample_hitting_time(params, Discipline::jsq, start, target, rng, event_cap);
}

double sample_T0(const SystemParams& params, Rng& rng, std::uint64_t event_cap) {
  static constexpr QueuePair kOrigin[] = {{0, 0}};
  return sample_T_general(params, {1, 0}, kOrigin, rng, event_cap);
}

double sample_T1(const SystemParams& params, Rng& rng, std::uint64_t event_cap) {
  static constexpr QueuePair kLevelOne[] = {{0, 1}, {1, 0}};
  return sample_T_general(params, {1, 1}, kLevelOne, rng, event_cap);
}

StationarySampler::StationarySampler(const DistVec& dist, const StateSpace& space)
    : space_(space), tail_mass_(dist.tail_mass) {
  if (dist.size() != space.size())
    throw std::invalid_argument("StationarySampler: size mismatch");
  cumulative_.resize(dist.size());
  std::partial_sum(dist.prob.begin(), dist.prob.end(), cumulative_.begin());
}

QueuePair StationarySampler::sample(Rng& rng) const {
  const double u = rng.uniform() * (cumulative_.back() + tail_mass_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return space_.state(cumulative_.size() - 1);
  return space_.state(static_cast<std::size_t>(it - cumulative_.begin()));
}

double sample_meeting_time(const SystemParams& params, const QueuePair& x,
                           const StationarySampler& stationary, Rng& rng,
                           std::uint64_t event_cap) {
  check_rates(params.lambda, params.mu);
  if (params.rho() >= 1.0) throw UnstableSystem();
  QueuePair p = x;
  QueuePair q = stationary.sample(rng);
  if (p == q) return 0.0;
  const double rate = params.lambda + 2.0 * params.mu;
  double t = 0.0;
  for (std::uint64_t k = 0; k < event_cap; ++k) {
    t += rng.exponential(rate);
    const EventKind kind = draw_kind(rng, params.lambda, params.mu);
    apply_to(p, Discipline::jsq, kind, true);
    apply_to(q, Discipline::jsq, kind, true);
    if (p == q) return t;
  }
  horizon_exceeded("sample_meeting_time", event_cap, t, p);
}

// ---------------------------------------------------------------------------
// Dominance

DominanceMonitor::DominanceMonitor(const QueuePair& upper, const QueuePair& lower) {
  if (!upper.dominates(lower)) throw std::invalid_argument("initial states not ordered");
  gap_ = (upper.q1 - lower.q1) + (upper.q2 - lower.q2);
}

bool DominanceMonitor::observe(const QueuePair& upper, const QueuePair& lower) {
  if (!upper.dominates(lower)) return false;
  const int gap = (upper.q1 - lower.q1) + (upper.q2 - lower.q2);
  if (gap > gap_) return false;
  gap_ = gap;
  return true;
}

DominanceCheck check_dominance(const CoupledTrajectory& trajectory, std::size_t i,
                               std::size_t j) {
  if (i >= trajectory.replica_count() || j >= trajectory.replica_count())
    throw std::out_of_range("check_dominance: replica index out of range");
  const Replica& upper = trajectory.initial(i);
  const Replica& lower = trajectory.initial(j);
  if (upper.discipline != Discipline::jsq || lower.discipline != Discipline::jsq ||
      !upper.state.dominates(lower.state))
    throw std::invalid_argument("initial states not ordered");

  DominanceMonitor monitor(upper.state, lower.state);
  DominanceCheck result;
  for (std::size_t e = 0; e < trajectory.event_count(); ++e) {
    ++result.events_checked;
    if (!monitor.observe(trajectory.state(e, i), trajectory.state(e, j))) {
      result.pass = false;
      result.first_violation = e;
      break;
    }
  }
  return result;
}

DominanceSuiteResult run_dominance_suite(double lambda, double mu, std::size_t pairs,
                                         std::size_t events, int max_start,
                                         std::uint64_t seed) {
  check_rates(lambda, mu);
  if (max_start < 0) throw std::invalid_argument("run_dominance_suite: max_start < 0");
  DominanceSuiteResult out;
  out.pairs = pairs;
  const auto span = static_cast<std::uint64_t>(max_start) + 1;
  for (std::size_t p = 0; p < pairs; ++p) {
    Rng rng = Rng::for_replication(seed, p);
    auto draw = [&] { return static_cast<int>(rng.next() % span); };
    QueuePair lower{draw(), draw()};
    QueuePair upper{lower.q1 + draw(), lower.q2 + draw()};
    ReplicaSet set(lambda, mu, {{upper, Discipline::jsq}, {lower, Discipline::jsq}});
    int gap = upper.total() - lower.total();
    bool met = upper == lower;
    for (std::size_t e = 0; e < events; ++e) {
      step(set, rng);
      const QueuePair& u = set[0].state;
      const QueuePair& l = set[1].state;
      ++out.events;
      if (!u.dominates(l)) ++out.dominance_violations;
      const int g = (u.q1 - l.q1) + (u.q2 - l.q2);
      if (g > gap) ++out.gap_violations;
      gap = g;
      if ((u.q1 == 0 && l.q1 != 0) || (u.q2 == 0 && l.q2 != 0))
        ++out.zero_implication_violations;
      if (met && u != l) ++out.coincidence_breaks;
      met = met || u == l;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

HittingStats summarize(std::span<const double> samples, std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  HittingStats s;
  s.n = samples.size();
  s.seed = seed;
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / double(s.n - 1);
  }
  s.half_width = 1.96 * std::sqrt(s.variance / double(s.n));
  return s;
}

double wilson_upper(std::size_t successes, std::size_t n, double z) {
  if (n == 0) throw std::invalid_argument("wilson_upper: n must be > 0");
  const double nn = double(n);
  const double p = double(successes) / nn;
  const double z2 = z * z;
  const double center = p + z2 / (2.0 * nn);
  const double radius = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::min(1.0, (center + radius) / (1.0 + z2 / nn));
}

KsResult ks_dominated(std::span<const double> smaller, std::span<const double> larger,
                      double alpha) {
  if (smaller.empty() || larger.empty())
    throw std::invalid_argument("ks_dominated: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ks_dominated: alpha in (0,1)");
  std::vector<double> a(smaller.begin(), smaller.end());
  std::vector<double> b(larger.begin(), larger.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = double(a.size());
  const double m = double(b.size());

  KsResult r;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    r.statistic = std::max(r.statistic, double(j) / m - double(i) / n);
  }
  r.critical = std::sqrt(-std::log(alpha) / 2.0 * (n + m) / (n * m));
  r.pass = r.statistic <= r.critical;
  return r;
}

std::vector<int> totals_on_grid(double lambda, double mu, const QueuePair& x,
                                Discipline discipline, std::span<const double> times,
                                Rng& rng) {
  check_rates(lambda, mu);
  const double rate = lambda + 2.0 * mu;
  std::vector<int> out;
  out.reserve(times.size());
  QueuePair q = x;
  double next_event = rng.exponential(rate);
  double previous = 0.0;
  for (double t : times) {
    if (t < previous) throw std::invalid_argument("totals_on_grid: times must be non-decreasing");
    previous = t;
    while (next_event <= t) {
      const EventKind kind = draw_kind(rng, lambda, mu);
      const bool route = discipline == Discipline::product && kind == EventKind::arrival
                             ? rng.uniform() < 0.5
                             : true;
      apply_to(q, discipline, kind, route);
      next_event += rng.exponential(rate);
    }
    out.push_back(q.total());
  }
  return out;
}

RecursionCertificate recursion_certificate(const SystemParams& params,
                                           const ExactHittingTimes& exact) {
  const double l = params.lambda;
  const double m = params.mu;
  const double both = exact.t1 + exact.t0;
  RecursionCertificate c;
  c.t0_lhs = exact.t0;
  c.t0_rhs = 1.0 / (l + m) + l / (l + m) * both;
  c.t0_relative_residual = std::abs(c.t0_lhs - c.t0_rhs) / std::abs(c.t0_lhs);
  c.t1_lhs = exact.t1;
  c.t1_rhs = 1.0 / (l + 2.0 * m) + l / (l + 2.0 * m) * both;
  c.t1_margin = c.t1_rhs - c.t1_lhs;
  c.pass = c.t0_relative_residual <= 1e-6 && c.t1_margin >= 0.0;
  return c;
}

}  // namespace jsq
