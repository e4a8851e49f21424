#pragma once

// Deterministic local strategies D_j(ab|xy) = [a = f_A(x)][b = f_B(y)].
//
// Index j = j_A * (b_card ^ y_card) + j_B, where j_A is the base-a_card
// digit string f_A(0) f_A(1) ... (input 0 most significant); likewise j_B.

#include <cstdint>
#include <limits>
#include <vector>

#include "nlbox/box.hpp"

namespace nlbox {

struct DeterministicStrategy {
  std::uint64_t index = 0;
  std::vector<std::uint32_t> alice;  // f_A(x)
  std::vector<std::uint32_t> bob;    // f_B(y)
};

namespace detail {

inline std::uint64_t checked_power(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (base != 0 && out > std::numeric_limits<std::uint64_t>::max() / base)
      throw InvalidInput("strategy count overflows a 64-bit counter");
    out *= base;
  }
  return out;
}

}  // namespace detail

class StrategySpace {
 public:
  explicit StrategySpace(BoxShape shape)
      : shape_(shape),
        alice_count_(detail::checked_power(shape.a_card, shape.x_card)),
        bob_count_(detail::checked_power(shape.b_card, shape.y_card)) {
    if (alice_count_ > std::numeric_limits<std::uint64_t>::max() / bob_count_)
      throw InvalidInput("strategy count overflows a 64-bit counter");
    count_ = alice_count_ * bob_count_;
  }

  const BoxShape& shape() const { return shape_; }
  std::uint64_t alice_count() const { return alice_count_; }
  std::uint64_t bob_count() const { return bob_count_; }
  std::uint64_t count() const { return count_; }

  void decode_party(std::uint64_t code, std::size_t inputs, std::size_t outputs,
                    std::vector<std::uint32_t>& out) const {
    out.resize(inputs);
    for (std::size_t i = inputs; i-- > 0;) {
      out[i] = static_cast<std::uint32_t>(code % outputs);
      code /= outputs;
    }
  }

  DeterministicStrategy at(std::uint64_t j) const {
    if (j >= count_) throw InvalidInput("strategy index out of range");
    DeterministicStrategy s;
    s.index = j;
    decode_party(j / bob_count_, shape_.x_card, shape_.a_card, s.alice);
    decode_party(j % bob_count_, shape_.y_card, shape_.b_card, s.bob);
    return s;
  }

  std::uint64_t encode(const std::vector<std::uint32_t>& alice,
                       const std::vector<std::uint32_t>& bob) const {
    std::uint64_t ja = 0, jb = 0;
    for (std::uint32_t v : alice) ja = ja * shape_.a_card + v;
    for (std::uint32_t v : bob) jb = jb * shape_.b_card + v;
    return ja * bob_count_ + jb;
  }

  /// Flat box entries (x, y, f_A(x), f_B(y)) where D_j is 1.
  void support(std::uint64_t j, std::vector<std::uint32_t>& rows) const {
    const DeterministicStrategy s = at(j);
    support(s, rows);
  }

  void support(const DeterministicStrategy& s, std::vector<std::uint32_t>& rows) const {
    rows.clear();
    for (std::size_t x = 0; x < shape_.x_card; ++x)
      for (std::size_t y = 0; y < shape_.y_card; ++y)
        rows.push_back(static_cast<std::uint32_t>(shape_.index(x, y, s.alice[x], s.bob[y])));
  }

  BehaviorBox box(std::uint64_t j) const {
    std::vector<double> p(shape_.size(), 0.0);
    std::vector<std::uint32_t> rows;
    support(j, rows);
    for (std::uint32_t r : rows) p[r] = 1.0;
    return BehaviorBox(shape_, std::move(p));
  }

  /// Visits every strategy in increasing index order.
  template <class F>
  void for_each(F&& f) const {
    for (std::uint64_t j = 0; j < count_; ++j) f(at(j));
  }

 private:
  BoxShape shape_;
  std::uint64_t alice_count_;
  std::uint64_t bob_count_;
  std::uint64_t count_ = 0;
};

inline StrategySpace enumerate_strategies(const BoxShape& shape) { return StrategySpace(shape); }

}  // namespace nlbox
