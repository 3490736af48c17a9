#pragma once

#include <compare>
#include <cstddef>
#include <ostream>

namespace jsq {

/// Queue-length vector (q1, q2).
struct QueuePair {
  int q1 = 0;
  int q2 = 0;

  [[nodiscard]] int total() const { return q1 + q2; }
  [[nodiscard]] bool dominates(const QueuePair& other) const {
    return q1 >= other.q1 && q2 >= other.q2;
  }
  friend auto operator<=>(const QueuePair&, const QueuePair&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const QueuePair& q) {
  return os << '(' << q.q1 << ',' << q.q2 << ')';
}

/// The box [0,B]^2 enumerated row-major: q1 major, q2 minor.
class StateSpace {
 public:
  explicit StateSpace(int buffer);

  [[nodiscard]] int buffer() const { return buffer_; }
  [[nodiscard]] std::size_t size() const { return side_ * side_; }
  [[nodiscard]] bool contains(const QueuePair& q) const {
    return q.q1 >= 0 && q.q2 >= 0 && q.q1 <= buffer_ && q.q2 <= buffer_;
  }

  /// Dense index of q; throws std::out_of_range outside the box.
  [[nodiscard]] std::size_t index(const QueuePair& q) const;
  [[nodiscard]] QueuePair state(std::size_t index) const;

 private:
  int buffer_;
  std::size_t side_;
};

}  // namespace jsq
