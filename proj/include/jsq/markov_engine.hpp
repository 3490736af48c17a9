#pragma once

// Finite-state CTMC numerics: generators, uniformized transient solves,
// stationary and hitting-time solves, total variation.
//
// Truncated chains are allowed to leak: a row may carry a "loss" rate that
// leaves the enumerated space (arrivals past the buffer). Transient solves
// book that flux into DistVec::tail_mass; stationary and hitting-time solves
// treat it as blocked (folded back into the diagonal).

#include <cstddef>
#include <span>
#include <vector>

#include "jsq/params.hpp"
#include "jsq/state_space.hpp"

namespace jsq {

struct Transition {
  std::size_t col = 0;
  double rate = 0.0;
};

/// Sparse CTMC generator. Off-diagonal rates are stored per row; the diagonal
/// is always -(sum of off-diagonal rates + loss), so rows sum to zero once the
/// loss column is counted.
class Generator {
 public:
  class Builder {
   public:
    explicit Builder(std::size_t dimension);

    /// Adds `rate` to the (row, col) entry. Throws on negative rates,
    /// out-of-range indices or row == col.
    Builder& add(std::size_t row, std::size_t col, double rate);
    /// Adds a rate leaving the enumerated space from `row`.
    Builder& add_loss(std::size_t row, double rate);

    [[nodiscard]] Generator build() &&;

   private:
    std::size_t dimension_;
    std::vector<std::vector<Transition>> rows_;
    std::vector<double> loss_;
  };

  Generator() = default;

  [[nodiscard]] std::size_t dimension() const { return diagonal_.size(); }
  [[nodiscard]] std::span<const Transition> row(std::size_t i) const {
    return {entries_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
  }
  [[nodiscard]] double diagonal(std::size_t i) const { return diagonal_[i]; }
  [[nodiscard]] double loss(std::size_t i) const { return loss_[i]; }
  [[nodiscard]] std::span<const double> losses() const { return loss_; }
  [[nodiscard]] bool has_loss() const;

  /// Same chain with every loss rate turned into a self-loop (blocked move).
  [[nodiscard]] Generator blocked() const;

  /// max_i |sum_j G_ij + loss_i|; zero up to rounding by construction.
  [[nodiscard]] double max_row_sum_error() const;
  [[nodiscard]] std::size_t nonzeros() const { return entries_.size(); }

 private:
  std::vector<std::size_t> row_start_{0};
  std::vector<Transition> entries_;
  std::vector<double> diagonal_;
  std::vector<double> loss_;
};

/// Probability vector over a finite enumeration plus the mass known to sit
/// outside it. Entries + tail_mass = 1.
struct DistVec {
  std::vector<double> prob;
  double tail_mass = 0.0;

  [[nodiscard]] static DistVec point_mass(std::size_t dimension,
                                          std::size_t index);

  [[nodiscard]] std::size_t size() const { return prob.size(); }
  [[nodiscard]] double enumerated_mass() const;

  /// Throws std::invalid_argument on negative entries or when entries plus
  /// tail deviate from one by more than `tol`.
  void validate(double tol = 1e-12) const;
};

/// Uniformized chain P = I + G/rate. `loss[i]` is the per-step probability of
/// leaving the enumerated space; each row of P plus its loss sums to one.
struct Uniformized {
  double rate = 1.0;
  std::vector<std::size_t> row_start;
  std::vector<Transition> entries;  // includes the diagonal when nonzero
  std::vector<double> loss;

  [[nodiscard]] std::size_t dimension() const { return loss.size(); }
  /// out = in * P (row-vector convention).
  void left_multiply(std::span<const double> in, std::span<double> out) const;
};

[[nodiscard]] Uniformized uniformize(const Generator& generator);

/// Truncated Poisson(mean) weights w_k for k in [first, first + size) whose
/// sum is at least 1 - tol.
struct PoissonWindow {
  std::size_t first = 0;
  std::vector<double> weights;
};
[[nodiscard]] PoissonWindow poisson_window(double mean, double tol);

inline constexpr double kDefaultTransientTol = 1e-12;

/// init * exp(tG) by uniformization. Entries are lower bounds of the exact
/// values; whatever is missing (flux past the buffer plus the discarded
/// Poisson weight) lands in tail_mass.
[[nodiscard]] DistVec transient_distribution(const Generator& generator,
                                             const DistVec& init, double t,
                                             double tol = kDefaultTransientTol);

/// Transient distributions at each of `times` (non-decreasing), advancing
/// incrementally from one time to the next.
[[nodiscard]] std::vector<DistVec> transient_path(
    const Generator& generator, const DistVec& init,
    std::span<const double> times, double tol = kDefaultTransientTol);

/// Solves pi G = 0, sum pi = 1 on the blocked chain. Throws SolveError if the
/// residual ||pi G||_1 cannot be brought below tol.
[[nodiscard]] DistVec stationary_distribution(const Generator& generator,
                                              double tol = 1e-12);

/// ||pi G||_1 on the blocked chain.
[[nodiscard]] double stationary_residual(const Generator& generator,
                                         std::span<const double> pi);

struct TvDistance {
  double value = 0.0;   // half L1 over enumerated entries
  double radius = 0.0;  // (p.tail_mass + q.tail_mass) / 2

  [[nodiscard]] double upper() const { return value + radius; }
};

[[nodiscard]] TvDistance total_variation(const DistVec& p, const DistVec& q);

struct HittingSolve {
  std::vector<std::size_t> target;
  std::vector<double> expected;  // E[T(x; target)] for every start x
  double residual = 0.0;         // max_x |(G h)(x) + 1| over non-target x
};

/// Mean first-passage times into `target` on the blocked chain.
/// Throws SolveError naming a state that cannot reach the target.
[[nodiscard]] HittingSolve expected_hitting_time(
    const Generator& generator, std::span<const std::size_t> target);

/// Upper bound on the stationary mass outside [0,B]^2 from the product of two
/// geometric(rho) tails: 1 - (1 - rho^(B+1))^2.
/// Throws UnstableSystem for rho >= 1.
[[nodiscard]] double tail_mass_bound(double rho, int buffer);
[[nodiscard]] double tail_mass_bound(const SystemParams& params);

inline constexpr double kDefaultTailTarget = 1e-10;
inline constexpr int kMaxBuffer = 2000;

/// Smallest B with tail_mass_bound(rho, B) <= target, or -1 when that would
/// exceed `cap`.
[[nodiscard]] int smallest_buffer(double rho, double target = kDefaultTailTarget,
                                  int cap = kMaxBuffer);

}  // namespace jsq
