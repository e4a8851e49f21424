#pragma once

// Exact-rational audit of an LP answer. The box is rationalized entrywise
// (continued fractions under a denominator cap); the mixture and the dual
// weights are rationalized the same way with an exact binary fallback. Any
// non-negative mixture repaired to satisfy D q <= p gives an upper bound on
// the cost, and any non-negative dual vector w gives
//   p_L <= (p . w) / min_j w(supp D_j),
// so the resulting interval is rigorous for the rationalized box.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nlbox/epr2_types.hpp"
#include "nlbox/strategies.hpp"

namespace nlbox {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational exact_rational(double v) {
  if (v == 0.0 || !std::isfinite(v)) return Rational(0);
  int exp = 0;
  const double mant = std::frexp(v, &exp);  // v = mant * 2^exp, |mant| in [0.5, 1)
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  Rational r(scaled);
  const int shift = exp - 53;
  if (shift >= 0) {
    r *= Rational(BigInt(1) << shift);
  } else {
    r /= Rational(BigInt(1) << -shift);
  }
  return r;
}

/// Simplest continued-fraction convergent within `tol` of v, if one exists
/// with denominator <= cap.
inline std::optional<Rational> rationalize(double v, std::uint64_t denominator_cap, double tol) {
  if (v == 0.0) return Rational(0);
  if (!std::isfinite(v)) return std::nullopt;
  const Rational target = exact_rational(v);
  const Rational tol_r = exact_rational(tol);
  // Convergents h1/k1 with predecessors h2/k2.
  BigInt h1 = 1, h2 = 0, k1 = 0, k2 = 1;
  Rational rest = target;
  for (int step = 0; step < 128; ++step) {
    const BigInt& num = boost::multiprecision::numerator(rest);
    const BigInt& den = boost::multiprecision::denominator(rest);
    BigInt a = num / den;
    if (num < 0 && a * den != num) a -= 1;  // floor
    BigInt hn = a * h1 + h2;
    BigInt kn = a * k1 + k2;
    h2 = h1;
    h1 = hn;
    k2 = k1;
    k1 = kn;
    if (k1 > BigInt(denominator_cap)) return std::nullopt;
    const Rational approx(h1, k1);
    const Rational err = approx > target ? Rational(approx - target) : Rational(target - approx);
    if (err <= tol_r) return approx;
    const Rational frac = rest - Rational(a);
    if (frac == 0) return approx;
    rest = 1 / frac;
  }
  return std::nullopt;
}

namespace detail {

inline Rational rational_or_exact(double v, std::uint64_t cap, double tol) {
  if (auto r = rationalize(v, cap, tol)) return *r;
  return exact_rational(v);
}

inline double round_down(const Rational& r) {
  double d = r.convert_to<double>();
  if (exact_rational(d) > r) d = std::nextafter(d, -INFINITY);
  return d;
}

inline double round_up(const Rational& r) {
  double d = r.convert_to<double>();
  if (exact_rational(d) < r) d = std::nextafter(d, INFINITY);
  return d;
}

/// min over strategies of the weight w carries on the strategy's support,
/// decomposed per Alice function: sum_y min_b sum_x w(x, y, f_A(x), b).
template <class T>
T min_strategy_mass(const BoxShape& s, const std::vector<T>& w) {
  const StrategySpace space(s);
  std::vector<std::uint32_t> fa;
  std::optional<T> best;
  for (std::uint64_t ja = 0; ja < space.alice_count(); ++ja) {
    space.decode_party(ja, s.x_card, s.a_card, fa);
    T total = 0;
    for (std::size_t y = 0; y < s.y_card; ++y) {
      std::optional<T> low;
      for (std::size_t b = 0; b < s.b_card; ++b) {
        T mass = 0;
        for (std::size_t x = 0; x < s.x_card; ++x) mass += w[s.index(x, y, fa[x], b)];
        if (!low || mass < *low) low = mass;
      }
      total += *low;
    }
    if (!best || total < *best) best = total;
  }
  return *best;
}

}  // namespace detail

inline CertifiedBounds certify(const BehaviorBox& box, const Epr2Result& result,
                               std::uint64_t denominator_cap = 1'000'000'000'000ULL) {
  CertifiedBounds out;
  const BoxShape& s = box.shape();
  if (result.shape != s || result.dual_certificate.size() != s.size())
    throw InvalidInput("LP result does not belong to this box");

  std::vector<Rational> p(s.size());
  bool rational_box = true;
  for (std::size_t e = 0; e < s.size(); ++e) {
    const double v = std::max(0.0, box[e]);
    const double tol = 16.0 * std::abs(v) * 0x1p-52;
    if (auto r = rationalize(v, denominator_cap, tol)) {
      p[e] = *r;
    } else {
      rational_box = false;
      p[e] = exact_rational(v);
    }
  }

  // Primal side.
  const StrategySpace space(s);
  std::vector<Rational> q;
  std::vector<std::vector<std::uint32_t>> supports;
  std::vector<Rational> load(s.size(), Rational(0));
  for (const MixtureWeight& m : result.mixture) {
    q.push_back(m.weight > 0.0 ? detail::rational_or_exact(m.weight, denominator_cap, 1e-13)
                               : Rational(0));
    supports.emplace_back();
    space.support(m.strategy, supports.back());
    for (std::uint32_t e : supports.back()) load[e] += q.back();
  }
  out.primal_feasible = true;
  for (std::size_t e = 0; e < s.size(); ++e)
    if (load[e] > p[e]) out.primal_feasible = false;
  // Shrink weights covering overloaded entries until the mixture fits.
  for (std::size_t e = 0; e < s.size(); ++e) {
    for (std::size_t j = 0; j < q.size() && load[e] > p[e]; ++j) {
      if (q[j] == 0) continue;
      if (std::find(supports[j].begin(), supports[j].end(), e) == supports[j].end()) continue;
      const Rational excess = load[e] - p[e];
      const Rational cut = q[j] < excess ? q[j] : excess;
      q[j] -= cut;
      for (std::uint32_t f : supports[j]) load[f] -= cut;
    }
  }
  Rational local_lower(0);
  for (const Rational& v : q) local_lower += v;
  Rational cost_upper = 1 - local_lower;

  // Dual side.
  std::vector<Rational> w(s.size());
  bool nonnegative = true;
  for (std::size_t e = 0; e < s.size(); ++e) {
    const double v = result.dual_certificate[e];
    if (v < 0.0) nonnegative = false;
    w[e] = std::abs(v) < 1e-13 || v < 0.0 ? Rational(0)
                                          : detail::rational_or_exact(v, denominator_cap, 1e-13);
  }
  const Rational mass = detail::min_strategy_mass(s, w);
  out.dual_feasible = nonnegative && mass >= 1;
  Rational cost_lower(0);
  if (mass > 0) {
    Rational pw(0);
    for (std::size_t e = 0; e < s.size(); ++e) pw += p[e] * w[e];
    cost_lower = 1 - pw / mass;
    if (cost_lower < 0) cost_lower = 0;
  }
  if (cost_upper > 1) cost_upper = 1;

  out.certified = rational_box;
  out.lower = detail::round_down(cost_lower);
  out.upper = detail::round_up(cost_upper);
  out.lower_exact = cost_lower.str();
  out.upper_exact = cost_upper.str();
  return out;
}

}  // namespace nlbox
