#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "jsq/errors.hpp"
#include "jsq/jsq_model.hpp"
#include "jsq/markov_engine.hpp"

using namespace jsq;

namespace {

Generator two_state(double a, double b) {
  Generator::Builder builder(2);
  builder.add(0, 1, a).add(1, 0, b);
  return std::move(builder).build();
}

double l1(const DistVec& p, const DistVec& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p.prob[i] - q.prob[i]);
  return s;
}

// Dense sub-generator including loss on the diagonal.
Eigen::MatrixXd dense(const Generator& g) {
  const auto n = static_cast<Eigen::Index>(g.dimension());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < g.dimension(); ++i) {
    m(i, i) = g.diagonal(i);
    for (const auto& e : g.row(i)) m(i, e.col) += e.rate;
  }
  return m;
}

DistVec random_dist(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DistVec d;
  d.prob.resize(n);
  for (double& p : d.prob) p = u(gen);
  const double s = std::accumulate(d.prob.begin(), d.prob.end(), 0.0);
  for (double& p : d.prob) p /= s;
  return d;
}

}  // namespace

TEST_CASE("state space enumeration is row-major and bijective") {
  const StateSpace space(3);
  CHECK(space.size() == 16);
  CHECK(space.index({0, 0}) == 0);
  CHECK(space.index({0, 3}) == 3);
  CHECK(space.index({1, 0}) == 4);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.state(i)) == i);
  CHECK_THROWS_AS((void)space.index({4, 0}), std::out_of_range);
  CHECK_FALSE(space.contains({-1, 0}));
}

TEST_CASE("builder rejects bad entries and balances the diagonal") {
  Generator::Builder b(3);
  CHECK_THROWS_AS(b.add(0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(b.add(0, 1, -1.0), std::invalid_argument);
  CHECK_THROWS(b.add(0, 3, 1.0));
  b.add(0, 1, 1.0).add(0, 1, 0.5).add(1, 2, 2.0).add_loss(2, 0.25);
  const Generator g = std::move(b).build();
  CHECK(g.row(0).size() == 1);
  CHECK(g.row(0)[0].rate == doctest::Approx(1.5));
  CHECK(g.diagonal(0) == doctest::Approx(-1.5));
  CHECK(g.diagonal(2) == doctest::Approx(-0.25));
  CHECK(g.has_loss());
  CHECK(g.max_row_sum_error() <= 1e-15);
  const Generator blocked = g.blocked();
  CHECK_FALSE(blocked.has_loss());
  CHECK(blocked.diagonal(2) == 0.0);
}

TEST_CASE("uniformize: two-state chain, JSQ rate, zero singleton, empty") {
  const Uniformized u = uniformize(two_state(1.0, 1.0));
  CHECK(u.rate == 1.0);
  std::array<double, 2> out{};
  const std::array<double, 2> e0{1.0, 0.0};
  u.left_multiply(e0, out);
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[1] == doctest::Approx(1.0));

  const Uniformized j = uniformize(jsq_generator({1.0, 1.0, 6}));
  CHECK(j.rate == doctest::Approx(3.0));
  for (std::size_t i = 0; i < j.dimension(); ++i) {
    double row = j.loss[i];
    for (std::size_t k = j.row_start[i]; k < j.row_start[i + 1]; ++k) row += j.entries[k].rate;
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }

  const Generator zero = std::move(Generator::Builder(1)).build();
  const Uniformized z = uniformize(zero);
  CHECK(z.rate == 1.0);
  std::array<double, 1> one{1.0}, res{};
  z.left_multiply(one, res);
  CHECK(res[0] == 1.0);

  const Generator empty = std::move(Generator::Builder(0)).build();
  CHECK_THROWS_WITH_AS((void)uniformize(empty), "empty state space", std::invalid_argument);
}

TEST_CASE("poisson window keeps at least 1 - tol of the mass") {
  for (double mean : {0.0, 0.3, 5.0, 200.0, 3e4}) {
    const PoissonWindow w = poisson_window(mean, 1e-12);
    const double s = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    CHECK(s >= 1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("transient: identity at t = 0 and argument checks") {
  const Generator g = jsq_generator({1.0, 1.0, 5});
  const DistVec init = DistVec::point_mass(g.dimension(), 7);
  const DistVec same = transient_distribution(g, init, 0.0);
  CHECK(same.prob == init.prob);
  CHECK(same.tail_mass == init.tail_mass);
  CHECK_THROWS_AS((void)transient_distribution(g, init, -1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)transient_distribution(g, init, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("transient: two-state closed form") {
  const DistVec p = transient_distribution(two_state(1.0, 1.0), DistVec::point_mass(2, 0), 1.0);
  CHECK(p.prob[0] == doctest::Approx(0.5 * (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(p.prob[1] == doctest::Approx(0.5 * (1.0 - std::exp(-2.0))).epsilon(1e-12));
  p.validate();
}

TEST_CASE("transient matches a dense matrix exponential on a small leaky box") {
  const Generator g = jsq_generator({1.3, 1.0, 4});
  const Eigen::MatrixXd q = dense(g);
  const StateSpace space(4);
  const DistVec init = DistVec::point_mass(space.size(), space.index({2, 1}));
  for (double t : {0.1, 1.0, 7.5, 40.0}) {
    const DistVec p = transient_distribution(g, init, t);
    const Eigen::MatrixXd e = (q * t).exp();
    double missing = 1.0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const double exact = e(static_cast<Eigen::Index>(space.index({2, 1})), i);
      CHECK(p.prob[i] == doctest::Approx(exact).epsilon(1e-9).scale(1.0));
      CHECK(p.prob[i] <= exact + 1e-12);
      missing -= exact;
    }
    CHECK(p.tail_mass >= missing - 1e-12);
    CHECK(p.tail_mass <= missing + 1e-11);
    p.validate();
  }
}

TEST_CASE("transient semigroup property on random (s, t)") {
  const Generator g = jsq_generator({1.0, 1.0, 12});
  const double tol = 1e-12;
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  const DistVec init = random_dist(g.dimension(), gen);
  for (int k = 0; k < 5; ++k) {
    const double s = u(gen);
    const double t = u(gen);
    const DistVec direct = transient_distribution(g, init, s + t, tol);
    const DistVec two = transient_distribution(g, transient_distribution(g, init, s, tol), t, tol);
    CHECK(l1(direct, two) <= 10 * tol);
  }
}

TEST_CASE("transient path agrees with independent solves") {
  const Generator g = jsq_generator({0.8, 1.0, 10});
  const DistVec init = DistVec::point_mass(g.dimension(), 0);
  const std::vector<double> times{0.0, 0.5, 3.0, 3.0, 25.0};
  const auto path = transient_path(g, init, times);
  REQUIRE(path.size() == times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(l1(path[k], transient_distribution(g, init, times[k])) <= 1e-11);
}

TEST_CASE("long-run transient on the blocked chain reaches the stationary law") {
  const SystemParams params{1.0, 1.0, 34};
  const Generator g = jsq_generator(params).blocked();
  const DistVec pi = stationary_distribution(g);
  const DistVec p = transient_distribution(g, DistVec::point_mass(g.dimension(), 0), 1e4);
  CHECK(l1(p, pi) <= 1e-10);
}

TEST_CASE("stationary distribution: symmetric pair, truncated geometric, product form") {
  const DistVec two = stationary_distribution(two_state(1.0, 1.0));
  CHECK(two.prob[0] == doctest::Approx(0.5));
  CHECK(two.prob[1] == doctest::Approx(0.5));
  CHECK(two.tail_mass == 0.0);

  const int b = 200;
  const DistVec mm1 = stationary_distribution(mm1_generator(0.5, 1.0, b));
  const double norm = 1.0 - std::pow(0.5, b + 1);
  for (int k = 0; k <= b; ++k)
    CHECK(std::abs(mm1.prob[k] - std::pow(0.5, k) * 0.5 / norm) <= 1e-10);

  const SystemParams params{1.0, 1.0, 100};
  const DistVec prod = stationary_distribution(mm1_product_generator(params));
  const DistVec ref = product_geometric_stationary(0.5, 100);
  double worst = 0.0;
  for (std::size_t i = 0; i < prod.size(); ++i) worst = std::max(worst, std::abs(prod.prob[i] - ref.prob[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("stationary output is a fixed point of the transient map") {
  const Generator g = jsq_generator({1.2, 1.0, 30}).blocked();
  const DistVec pi = stationary_distribution(g);
  CHECK(stationary_residual(g, pi.prob) <= 1e-12);
  for (double t : {0.0, 1.0, 50.0}) CHECK(l1(transient_distribution(g, pi, t), pi) <= 1e-11);
}

TEST_CASE("total variation: zero, disjoint, half, symmetric, triangle") {
  DistVec p{{0.5, 0.5}, 0.0};
  DistVec q{{1.0, 0.0}, 0.0};
  CHECK(total_variation(p, p).value == 0.0);
  CHECK(total_variation(DistVec::point_mass(3, 0), DistVec::point_mass(3, 2)).value == 1.0);
  CHECK(total_variation(p, q).value == doctest::Approx(0.5));
  DistVec r{{0.2, 0.7}, 0.1};
  CHECK(total_variation(p, r).radius == doctest::Approx(0.05));
  CHECK_THROWS_AS((void)total_variation(p, DistVec::point_mass(3, 0)), std::invalid_argument);

  std::mt19937_64 gen(11);
  for (int k = 0; k < 50; ++k) {
    const DistVec a = random_dist(6, gen);
    const DistVec b = random_dist(6, gen);
    const DistVec c = random_dist(6, gen);
    CHECK(total_variation(a, b).value == doctest::Approx(total_variation(b, a).value));
    CHECK(total_variation(a, c).value <=
          total_variation(a, b).value + total_variation(b, c).value + 1e-15);
    CHECK(total_variation(a, b).value == doctest::Approx(0.5 * l1(a, b)));
  }
}

TEST_CASE("hitting times: M/M/1 busy periods") {
  const double lam = 0.5;
  const double mu = 1.0;
  const Generator g = mm1_generator(lam, mu, 200);
  const std::array<std::size_t, 1> zero{0};
  const HittingSolve h = expected_hitting_time(g, zero);
  CHECK(h.expected[0] == 0.0);
  CHECK(h.residual <= 1e-10);
  for (int k = 1; k <= 20; ++k) CHECK(std::abs(h.expected[k] - k / (mu - lam)) <= 1e-8);
}

TEST_CASE("hitting times: JSQ T0 and unreachable targets") {
  const SystemParams params{1.0, 1.0, 34};
  const StateSpace space(34);
  const HittingSolve h = jsq_hitting_to_origin(params);
  CHECK(h.expected[space.index({0, 0})] == 0.0);
  CHECK(h.expected[space.index({1, 0})] <= 3.0);
  for (double v : h.expected) CHECK(v >= 0.0);

  // State 2 is absorbing and cannot reach state 0.
  Generator::Builder b(3);
  b.add(1, 0, 1.0).add(1, 2, 1.0);
  const Generator g = std::move(b).build();
  const std::array<std::size_t, 1> target{0};
  CHECK_THROWS_WITH_AS((void)expected_hitting_time(g, target),
                       "hitting time: target unreachable from state index 2", SolveError);
  const std::array<std::size_t, 0> none{};
  CHECK_THROWS_AS((void)expected_hitting_time(g, none), std::invalid_argument);
}

TEST_CASE("tail mass bound values and buffer search") {
  CHECK(tail_mass_bound(0.5, 60) == doctest::Approx(8.673617379884035e-19).epsilon(1e-9));
  CHECK(tail_mass_bound(0.9, 200) == doctest::Approx(1.2e-9).epsilon(0.1));
  CHECK(tail_mass_bound(0.0, 0) == 0.0);
  CHECK(tail_mass_bound(1e-9, 3) >= 0.0);
  CHECK_THROWS_WITH_AS((void)tail_mass_bound(1.0, 10), "unstable system", UnstableSystem);
  const int b = smallest_buffer(0.5);
  CHECK(tail_mass_bound(0.5, b) <= kDefaultTailTarget);
  CHECK(tail_mass_bound(0.5, b - 1) > kDefaultTailTarget);
  CHECK(smallest_buffer(0.999) == -1);
}
