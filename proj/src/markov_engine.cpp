#include "jsq/markov_engine.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "jsq/errors.hpp"

namespace jsq {

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(int buffer) : buffer_(buffer) {
  if (buffer < 0) throw std::invalid_argument("StateSpace: negative buffer");
  side_ = static_cast<std::size_t>(buffer) + 1;
}

std::size_t StateSpace::index(const QueuePair& q) const {
  if (!contains(q)) {
    std::ostringstream os;
    os << "state " << q << " outside [0," << buffer_ << "]^2";
    throw std::out_of_range(os.str());
  }
  return static_cast<std::size_t>(q.q1) * side_ + static_cast<std::size_t>(q.q2);
}

QueuePair StateSpace::state(std::size_t index) const {
  if (index >= size()) throw std::out_of_range("StateSpace: index out of range");
  return {static_cast<int>(index / side_), static_cast<int>(index % side_)};
}

// ---------------------------------------------------------------------------
// Generator

Generator::Builder::Builder(std::size_t dimension)
    : dimension_(dimension), rows_(dimension), loss_(dimension, 0.0) {}

Generator::Builder& Generator::Builder::add(std::size_t row, std::size_t col,
                                            double rate) {
  if (row >= dimension_ || col >= dimension_)
    throw std::out_of_range("Generator: index out of range");
  if (row == col) throw std::invalid_argument("Generator: explicit diagonal entry");
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("Generator: rates must be finite and >= 0");
  if (rate > 0.0) rows_[row].push_back({col, rate});
  return *this;
}

Generator::Builder& Generator::Builder::add_loss(std::size_t row, double rate) {
  if (row >= dimension_) throw std::out_of_range("Generator: index out of range");
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("Generator: rates must be finite and >= 0");
  loss_[row] += rate;
  return *this;
}

Generator Generator::Builder::build() && {
  Generator g;
  g.row_start_.reserve(dimension_ + 1);
  g.diagonal_.resize(dimension_);
  g.loss_ = std::move(loss_);
  for (std::size_t i = 0; i < dimension_; ++i) {
    auto& row = rows_[i];
    std::sort(row.begin(), row.end(),
              [](const Transition& a, const Transition& b) { return a.col < b.col; });
    double out = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k > 0 && row[k].col == row[k - 1].col) {
        g.entries_.back().rate += row[k].rate;
      } else {
        g.entries_.push_back(row[k]);
      }
      out += row[k].rate;
    }
    g.diagonal_[i] = -(out + g.loss_[i]);
    g.row_start_.push_back(g.entries_.size());
    std::vector<Transition>().swap(row);
  }
  return g;
}

bool Generator::has_loss() const {
  return std::any_of(loss_.begin(), loss_.end(), [](double r) { return r > 0.0; });
}

Generator Generator::blocked() const {
  Generator g = *this;
  for (std::size_t i = 0; i < dimension(); ++i) {
    g.diagonal_[i] += g.loss_[i];
    g.loss_[i] = 0.0;
  }
  return g;
}

double Generator::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    double sum = diagonal_[i] + loss_[i];
    for (const auto& e : row(i)) sum += e.rate;
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// DistVec

DistVec DistVec::point_mass(std::size_t dimension, std::size_t index) {
  if (index >= dimension) throw std::out_of_range("point_mass: index out of range");
  DistVec d;
  d.prob.assign(dimension, 0.0);
  d.prob[index] = 1.0;
  return d;
}

double DistVec::enumerated_mass() const {
  return std::accumulate(prob.begin(), prob.end(), 0.0);
}

void DistVec::validate(double tol) const {
  if (tail_mass < 0.0) throw std::invalid_argument("DistVec: negative tail mass");
  for (double p : prob)
    if (!(p >= 0.0)) throw std::invalid_argument("DistVec: negative or NaN entry");
  const double total = enumerated_mass() + tail_mass;
  if (std::abs(total - 1.0) > tol) {
    std::ostringstream os;
    os << "DistVec: entries + tail = " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
}

// ---------------------------------------------------------------------------
// Uniformization

void Uniformized::left_multiply(std::span<const double> in,
                                std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t n = dimension();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = in[i];
    if (p == 0.0) continue;
    for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k)
      out[entries[k].col] += p * entries[k].rate;
  }
}

Uniformized uniformize(const Generator& generator) {
  const std::size_t n = generator.dimension();
  if (n == 0) throw std::invalid_argument("empty state space");

  Uniformized u;
  double rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) rate = std::max(rate, -generator.diagonal(i));
  // An all-absorbing chain has no natural clock; any positive rate works.
  u.rate = rate > 0.0 ? rate : 1.0;

  u.row_start.reserve(n + 1);
  u.row_start.push_back(0);
  u.entries.reserve(generator.nonzeros() + n);
  u.loss.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double stay = 1.0 + generator.diagonal(i) / u.rate;
    bool placed = stay == 0.0;
    for (const auto& e : generator.row(i)) {
      if (!placed && e.col > i) {
        u.entries.push_back({i, stay});
        placed = true;
      }
      u.entries.push_back({e.col, e.rate / u.rate});
    }
    if (!placed) u.entries.push_back({i, stay});
    u.loss[i] = generator.loss(i) / u.rate;
    u.row_start.push_back(u.entries.size());
  }
  return u;
}

PoissonWindow poisson_window(double mean, double tol) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw std::invalid_argument("poisson_window: mean must be finite and >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("poisson_window: tol must be > 0");
  if (mean == 0.0) return {0, {1.0}};

  // Unnormalized weights relative to the mode, extended until the remaining
  // tails are negligible against tol, then normalized and trimmed.
  const auto mode = static_cast<std::size_t>(std::floor(mean));
  const double negligible = tol * 1e-4;
  std::deque<double> w{1.0};
  double sum = 1.0;
  std::size_t left = mode;
  while (left > 0) {
    const double next = w.front() * static_cast<double>(left) / mean;
    if (next < negligible * sum || next == 0.0) break;
    w.push_front(next);
    sum += next;
    --left;
  }
  std::size_t right = mode;
  for (;;) {
    const double ratio = mean / static_cast<double>(right + 1);
    const double next = w.back() * ratio;
    // Geometric bound on everything beyond `right` once ratio < 1.
    if (ratio < 1.0 && next / (1.0 - ratio) < negligible * sum) break;
    if (next == 0.0) break;
    w.push_back(next);
    sum += next;
    ++right;
  }
  for (double& x : w) x /= sum;

  double dropped = 0.0;
  while (w.size() > 1) {
    const bool front_smaller = w.front() <= w.back();
    const double candidate = front_smaller ? w.front() : w.back();
    if (dropped + candidate > 0.5 * tol) break;
    dropped += candidate;
    if (front_smaller) {
      w.pop_front();
      ++left;
    } else {
      w.pop_back();
    }
  }
  return {left, std::vector<double>(w.begin(), w.end())};
}

namespace {

void check_transient_args(const Generator& g, const DistVec& init, double t,
                          double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("transient: tol must be > 0");
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::invalid_argument("transient: t must be finite and >= 0");
  if (init.size() != g.dimension())
    throw std::invalid_argument("transient: initial distribution has wrong size");
}

DistVec advance(const Uniformized& u, const DistVec& init, double t, double tol) {
  if (t == 0.0) return init;
  const PoissonWindow window = poisson_window(u.rate * t, tol);
  const std::size_t n = u.dimension();
  const std::size_t last = window.first + window.weights.size() - 1;

  std::vector<double> v = init.prob;
  std::vector<double> next(n);
  std::vector<double> acc(n, 0.0);
  for (std::size_t k = 0;; ++k) {
    if (k >= window.first) {
      const double w = window.weights[k - window.first];
      for (std::size_t i = 0; i < n; ++i) acc[i] += w * v[i];
    }
    if (k == last) break;
    u.left_multiply(v, next);
    v.swap(next);
  }

  DistVec out;
  out.prob = std::move(acc);
  out.tail_mass = std::max(init.tail_mass, 1.0 - out.enumerated_mass());
  return out;
}

}  // namespace

DistVec transient_distribution(const Generator& generator, const DistVec& init,
                               double t, double tol) {
  check_transient_args(generator, init, t, tol);
  if (t == 0.0) return init;
  return advance(uniformize(generator), init, t, tol);
}

std::vector<DistVec> transient_path(const Generator& generator, const DistVec& init,
                                    std::span<const double> times, double tol) {
  const Uniformized u = uniformize(generator);
  std::vector<DistVec> out;
  out.reserve(times.size());
  DistVec current = init;
  double now = 0.0;
  for (double t : times) {
    check_transient_args(generator, init, t, tol);
    if (t < now) throw std::invalid_argument("transient_path: times must be non-decreasing");
    current = advance(u, current, t - now, tol);
    now = t;
    out.push_back(current);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear solves

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// Nested dissection on the graph of A + A^T. Separators come from BFS level
// sets rooted at a pseudo-peripheral vertex; parts are ordered before their
// separator. On lattice chains this keeps LU fill near n log n, far below
// what column minimum-degree orderings give.
class NestedDissection {
 public:
  using PermutationType = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  template <class MatrixType>
  void operator()(const MatrixType& mat, PermutationType& perm) {
    const auto n = static_cast<int>(mat.cols());
    build_adjacency(mat);
    part_.assign(n, 0);
    level_.assign(n, -1);
    order_.clear();
    order_.reserve(n);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    next_part_ = 1;
    dissect(all, 0);
    perm.resize(n);
    for (int k = 0; k < n; ++k) perm.indices()[order_[k]] = k;
  }

 private:
  static constexpr std::size_t kLeafSize = 64;

  template <class MatrixType>
  void build_adjacency(const MatrixType& mat) {
    const auto n = static_cast<int>(mat.cols());
    std::vector<std::pair<int, int>> edges;
    for (int c = 0; c < n; ++c) {
      for (typename MatrixType::InnerIterator it(mat, c); it; ++it) {
        const auto r = static_cast<int>(it.index());
        if (r == c) continue;
        edges.emplace_back(r, c);
        edges.emplace_back(c, r);
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    start_.assign(n + 1, 0);
    for (const auto& e : edges) ++start_[e.first + 1];
    std::partial_sum(start_.begin(), start_.end(), start_.begin());
    adjacency_.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) adjacency_[k] = edges[k].second;
  }

  // BFS inside the vertices labelled `part`; fills level_ and returns the
  // visit order. Only the component of `root` is reached.
  std::vector<int> bfs(int root, int part) {
    std::vector<int> visited{root};
    level_[root] = 0;
    for (std::size_t head = 0; head < visited.size(); ++head) {
      const int v = visited[head];
      for (int k = start_[v]; k < start_[v + 1]; ++k) {
        const int w = adjacency_[k];
        if (part_[w] == part && level_[w] < 0) {
          level_[w] = level_[v] + 1;
          visited.push_back(w);
        }
      }
    }
    return visited;
  }

  void reset_levels(const std::vector<int>& vertices) {
    for (int v : vertices) level_[v] = -1;
  }

  void dissect(const std::vector<int>& vertices, int part) {
    if (vertices.size() <= kLeafSize) {
      order_.insert(order_.end(), vertices.begin(), vertices.end());
      return;
    }
    std::vector<int> reached = bfs(vertices.front(), part);
    const int far = reached.back();
    reset_levels(reached);
    reached = bfs(far, part);

    std::vector<int> rest;
    if (reached.size() < vertices.size()) {
      for (int v : vertices)
        if (level_[v] < 0) rest.push_back(v);
    }
    const int depth = level_[reached.back()];
    if (depth < 2) {
      reset_levels(reached);
      order_.insert(order_.end(), reached.begin(), reached.end());
    } else {
      // Split at the level where the cumulative count passes half.
      std::size_t seen = 0;
      int cut = 1;
      for (std::size_t k = 0; k < reached.size(); ++k) {
        if (++seen * 2 >= reached.size()) {
          cut = std::clamp(level_[reached[k]], 1, depth - 1);
          break;
        }
      }
      std::vector<int> low, high, separator;
      for (int v : reached) {
        if (level_[v] < cut) low.push_back(v);
        else if (level_[v] > cut) high.push_back(v);
        else separator.push_back(v);
      }
      reset_levels(reached);
      const int low_part = next_part_++;
      const int high_part = next_part_++;
      for (int v : low) part_[v] = low_part;
      for (int v : high) part_[v] = high_part;
      for (int v : separator) part_[v] = -1;
      dissect(low, low_part);
      dissect(high, high_part);
      order_.insert(order_.end(), separator.begin(), separator.end());
    }
    if (!rest.empty()) dissect(rest, part);
  }

  std::vector<int> start_;
  std::vector<int> adjacency_;
  std::vector<int> part_;
  std::vector<int> level_;
  std::vector<int> order_;
  int next_part_ = 1;
};

using Solver = Eigen::SparseLU<SparseMatrix, NestedDissection>;

// Both systems solved here are diagonally dominant, so a low threshold keeps
// the pivots on the diagonal and the fill close to what the ordering predicts.
constexpr double kPivotThreshold = 0.01;

void factorize(Solver& solver, const SparseMatrix& a, const char* what) {
  solver.setPivotThreshold(kPivotThreshold);
  solver.analyzePattern(a);
  solver.factorize(a);
  if (solver.info() != Eigen::Success) {
    throw SolveError(std::string(what) + ": sparse factorization failed (" +
                     solver.lastErrorMessage() + ")");
  }
}

}  // namespace

double stationary_residual(const Generator& generator, std::span<const double> pi) {
  const std::size_t n = generator.dimension();
  if (pi.size() != n) throw std::invalid_argument("stationary_residual: size mismatch");
  std::vector<double> flow(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    flow[i] += pi[i] * (generator.diagonal(i) + generator.loss(i));
    for (const auto& e : generator.row(i)) flow[e.col] += pi[i] * e.rate;
  }
  double r = 0.0;
  for (double f : flow) r += std::abs(f);
  return r;
}

DistVec stationary_distribution(const Generator& generator, double tol) {
  const std::size_t n = generator.dimension();
  if (n == 0) throw std::invalid_argument("empty state space");
  if (!(tol > 0.0)) throw std::invalid_argument("stationary: tol must be > 0");
  DistVec out;
  if (n == 1) {
    out.prob = {1.0};
    return out;
  }

  // Pin pi(0) = 1 and solve the balance equations of the other states:
  // sum_{i != 0} pi(i) G(i,j) = -G(0,j) for j != 0. The system is the
  // transpose of a column-dominant M-matrix when the chain is irreducible.
  const Generator g = generator.blocked();
  const auto m = static_cast<int>(n - 1);
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(g.nonzeros() + n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (const auto& e : g.row(0)) b[static_cast<int>(e.col) - 1] = -e.rate;
  for (std::size_t i = 1; i < n; ++i) {
    const auto col = static_cast<int>(i) - 1;
    triplets.emplace_back(col, col, g.diagonal(i));
    for (const auto& e : g.row(i))
      if (e.col != 0) triplets.emplace_back(static_cast<int>(e.col) - 1, col, e.rate);
  }
  SparseMatrix a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Solver solver;
  factorize(solver, a, "stationary solve");
  Eigen::VectorXd x = solver.solve(b);

  out.prob.resize(n);
  double residual = 0.0;
  for (int refine = 0; refine < 4; ++refine) {
    out.prob[0] = 1.0;
    for (std::size_t i = 1; i < n; ++i)
      out.prob[i] = std::max(0.0, x[static_cast<Eigen::Index>(i) - 1]);
    const double total = out.enumerated_mass();
    for (double& p : out.prob) p /= total;
    residual = stationary_residual(g, out.prob);
    if (residual <= tol) return out;
    const Eigen::VectorXd r = b - a * x;
    x += solver.solve(r);
  }
  std::ostringstream os;
  os << "stationary solve did not converge: residual " << residual << " > tol " << tol;
  throw SolveError(os.str());
}

TvDistance total_variation(const DistVec& p, const DistVec& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("total_variation: mismatched state spaces");
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) l1 += std::abs(p.prob[i] - q.prob[i]);
  return {std::min(1.0, 0.5 * l1), 0.5 * (p.tail_mass + q.tail_mass)};
}

HittingSolve expected_hitting_time(const Generator& generator,
                                   std::span<const std::size_t> target) {
  const std::size_t n = generator.dimension();
  if (target.empty()) throw std::invalid_argument("hitting time: empty target set");
  std::vector<char> is_target(n, 0);
  for (std::size_t t : target) {
    if (t >= n) throw std::out_of_range("hitting time: target index out of range");
    is_target[t] = 1;
  }

  // Reverse reachability from the target set.
  std::vector<std::vector<std::size_t>> predecessors(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : generator.row(i)) predecessors[e.col].push_back(i);
  std::vector<char> reaches(is_target);
  std::vector<std::size_t> frontier(target.begin(), target.end());
  while (!frontier.empty()) {
    const std::size_t j = frontier.back();
    frontier.pop_back();
    for (std::size_t i : predecessors[j]) {
      if (!reaches[i]) {
        reaches[i] = 1;
        frontier.push_back(i);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!reaches[i]) {
      throw SolveError("hitting time: target unreachable from state index " +
                       std::to_string(i));
    }
  }

  HittingSolve out;
  out.target.assign(target.begin(), target.end());
  out.expected.assign(n, 0.0);

  std::vector<int> unknown(n, -1);
  int m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_target[i]) unknown[i] = m++;
  if (m == 0) return out;

  // (-G) h = 1 on non-target rows, h = 0 on the target.
  const Generator g = generator.blocked();
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(g.nonzeros() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = unknown[i];
    if (r < 0) continue;
    triplets.emplace_back(r, r, -g.diagonal(i));
    for (const auto& e : g.row(i)) {
      const int c = unknown[e.col];
      if (c >= 0) triplets.emplace_back(r, c, -e.rate);
    }
  }
  SparseMatrix a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Solver solver;
  factorize(solver, a, "hitting time solve");
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd h = solver.solve(b);

  auto residual_of = [&](const Eigen::VectorXd& x) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int r = unknown[i];
      if (r < 0) continue;
      double gh = g.diagonal(i) * x[r];
      for (const auto& e : g.row(i)) {
        const int c = unknown[e.col];
        if (c >= 0) gh += e.rate * x[c];
      }
      worst = std::max(worst, std::abs(gh + 1.0));
    }
    return worst;
  };

  double residual = residual_of(h);
  for (int refine = 0; refine < 3 && residual > 1e-12; ++refine) {
    const Eigen::VectorXd r = b - a * h;
    h += solver.solve(r);
    residual = residual_of(h);
  }
  if (!(residual <= 1e-10)) {
    std::ostringstream os;
    os << "hitting time solve: residual " << residual << " exceeds 1e-10";
    throw SolveError(os.str());
  }
  for (std::size_t i = 0; i < n; ++i)
    if (unknown[i] >= 0) out.expected[i] = std::max(0.0, h[unknown[i]]);
  out.residual = residual;
  return out;
}

// ---------------------------------------------------------------------------
// Truncation

double tail_mass_bound(double rho, int buffer) {
  if (!(rho >= 0.0)) throw std::invalid_argument("tail_mass_bound: rho must be >= 0");
  if (rho >= 1.0) throw UnstableSystem();
  if (buffer < 0) throw std::invalid_argument("tail_mass_bound: negative buffer");
  // 1 - (1 - x)^2 written as x (2 - x) so tiny tails do not cancel to zero.
  const double x = std::pow(rho, buffer + 1);
  return x * (2.0 - x);
}

double tail_mass_bound(const SystemParams& params) {
  params.validate();
  return tail_mass_bound(params.rho(), params.buffer);
}

int smallest_buffer(double rho, double target, int cap) {
  for (int b = 1; b <= cap; ++b)
    if (tail_mass_bound(rho, b) <= target) return b;
  return -1;
}

}  // namespace jsq
