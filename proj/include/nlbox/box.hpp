#pragma once

// Two-party behavior boxes P(ab|xy): construction, validation, the
// PR / correlated / facet family, tensor products, relabelings, CHSH
// functionals and twirling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlbox/error.hpp"

namespace nlbox {

inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kClampTol = 1e-15;
inline constexpr double kLpTol = 1e-9;
inline constexpr double kClassificationTol = 1e-7;

struct BoxShape {
  std::size_t x_card = 2;
  std::size_t y_card = 2;
  std::size_t a_card = 2;
  std::size_t b_card = 2;

  constexpr std::size_t size() const { return x_card * y_card * a_card * b_card; }
  constexpr bool is_binary() const {
    return x_card == 2 && y_card == 2 && a_card == 2 && b_card == 2;
  }
  // x outermost, b innermost.
  constexpr std::size_t index(std::size_t x, std::size_t y, std::size_t a,
                              std::size_t b) const {
    return ((x * y_card + y) * a_card + a) * b_card + b;
  }
  friend constexpr bool operator==(const BoxShape&, const BoxShape&) = default;
};

inline constexpr BoxShape kBinaryShape{2, 2, 2, 2};

/// Joint conditional distribution over (x, y, a, b). The plain constructor
/// stores whatever it is given so that malformed boxes can be diagnosed;
/// `BehaviorBox::checked` enforces normalization, positivity and
/// no-signaling.
class BehaviorBox {
 public:
  BehaviorBox() : BehaviorBox(kBinaryShape, std::vector<double>(16, 0.25)) {}

  BehaviorBox(BoxShape shape, std::vector<double> p) : shape_(shape), p_(std::move(p)) {
    if (shape_.x_card == 0 || shape_.y_card == 0 || shape_.a_card == 0 || shape_.b_card == 0)
      throw InvalidInput("box cardinalities must be positive");
    if (p_.size() != shape_.size())
      throw InvalidInput("probability array has " + std::to_string(p_.size()) +
                         " entries, expected " + std::to_string(shape_.size()));
  }

  static BehaviorBox checked(BoxShape shape, std::vector<double> p);

  const BoxShape& shape() const { return shape_; }
  std::span<const double> values() const { return p_; }

  double operator()(std::size_t x, std::size_t y, std::size_t a, std::size_t b) const {
    return p_[shape_.index(x, y, a, b)];
  }
  double& at(std::size_t x, std::size_t y, std::size_t a, std::size_t b) {
    return p_[shape_.index(x, y, a, b)];
  }
  double operator[](std::size_t flat) const { return p_[flat]; }

  friend bool operator==(const BehaviorBox&, const BehaviorBox&) = default;

 private:
  BoxShape shape_;
  std::vector<double> p_;
};

struct BoxDiagnostics {
  double normalization_residual = 0.0;
  double no_signaling_residual = 0.0;
  double min_entry = 0.0;

  bool accepted(double tol = kConstructionTol) const {
    return normalization_residual <= tol && no_signaling_residual <= tol &&
           min_entry >= -kClampTol;
  }
};

inline BoxDiagnostics validate(const BehaviorBox& box) {
  const BoxShape& s = box.shape();
  BoxDiagnostics d;
  d.min_entry = *std::min_element(box.values().begin(), box.values().end());
  for (std::size_t x = 0; x < s.x_card; ++x)
    for (std::size_t y = 0; y < s.y_card; ++y) {
      double total = 0.0;
      for (std::size_t a = 0; a < s.a_card; ++a)
        for (std::size_t b = 0; b < s.b_card; ++b) total += box(x, y, a, b);
      d.normalization_residual = std::max(d.normalization_residual, std::abs(total - 1.0));
    }
  // Alice marginal compared across y, Bob marginal across x.
  for (std::size_t x = 0; x < s.x_card; ++x)
    for (std::size_t a = 0; a < s.a_card; ++a) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t y = 0; y < s.y_card; ++y) {
        double m = 0.0;
        for (std::size_t b = 0; b < s.b_card; ++b) m += box(x, y, a, b);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
      }
      d.no_signaling_residual = std::max(d.no_signaling_residual, hi - lo);
    }
  for (std::size_t y = 0; y < s.y_card; ++y)
    for (std::size_t b = 0; b < s.b_card; ++b) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t x = 0; x < s.x_card; ++x) {
        double m = 0.0;
        for (std::size_t a = 0; a < s.a_card; ++a) m += box(x, y, a, b);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
      }
      d.no_signaling_residual = std::max(d.no_signaling_residual, hi - lo);
    }
  return d;
}

inline void require_valid(const BehaviorBox& box, double tol = kConstructionTol) {
  const BoxDiagnostics d = validate(box);
  if (!d.accepted(tol))
    throw InvalidInput("box rejected: normalization residual " +
                       std::to_string(d.normalization_residual) + ", no-signaling residual " +
                       std::to_string(d.no_signaling_residual) + ", min entry " +
                       std::to_string(d.min_entry));
}

inline void require_binary(const BehaviorBox& box) {
  if (!box.shape().is_binary()) throw InvalidInput("operation requires a 2x2x2x2 box");
}

inline BehaviorBox BehaviorBox::checked(BoxShape shape, std::vector<double> p) {
  for (double& v : p) {
    if (v < -kClampTol || !std::isfinite(v))
      throw InvalidInput("box entry out of range: " + std::to_string(v));
    if (v < 0.0) v = 0.0;
  }
  BehaviorBox box(shape, std::move(p));
  require_valid(box);
  return box;
}

// ---------------------------------------------------------------------------
// Named boxes and the two-parameter family.

enum class NamedBox { PR, PC, PF, WhiteNoise, TsirelsonIso };

inline NamedBox parse_named_box(std::string_view name) {
  if (name == "PR") return NamedBox::PR;
  if (name == "PC") return NamedBox::PC;
  if (name == "PF") return NamedBox::PF;
  if (name == "WHITE_NOISE") return NamedBox::WhiteNoise;
  if (name == "TSIRELSON_ISO") return NamedBox::TsirelsonIso;
  throw InvalidInput("unknown box name '" + std::string(name) + "'");
}

namespace detail {

inline int parity_sign(unsigned bits) { return (bits & 1u) ? -1 : 1; }

template <class F>
BehaviorBox binary_box_from(F&& f) {
  std::vector<double> p(16);
  for (unsigned x = 0; x < 2; ++x)
    for (unsigned y = 0; y < 2; ++y)
      for (unsigned a = 0; a < 2; ++a)
        for (unsigned b = 0; b < 2; ++b) p[kBinaryShape.index(x, y, a, b)] = f(x, y, a, b);
  return BehaviorBox(kBinaryShape, std::move(p));
}

}  // namespace detail

inline BehaviorBox pr_box() {
  return detail::binary_box_from([](unsigned x, unsigned y, unsigned a, unsigned b) {
    return 0.25 * (1 + detail::parity_sign(a ^ b ^ (x & y)));
  });
}

inline BehaviorBox correlated_box() {
  return detail::binary_box_from([](unsigned, unsigned, unsigned a, unsigned b) {
    return 0.25 * (1 + detail::parity_sign(a ^ b));
  });
}

inline BehaviorBox facet_box() {
  return detail::binary_box_from([](unsigned x, unsigned y, unsigned a, unsigned b) {
    return 0.125 * (2 + detail::parity_sign(a ^ b ^ (x & y)));
  });
}

inline BehaviorBox white_noise_box() {
  return BehaviorBox(kBinaryShape, std::vector<double>(16, 0.25));
}

/// Point of the section xi*PR + gamma*PC + (1 - xi - gamma)*PF.
struct FamilyPoint {
  double xi = 0.0;
  double gamma = 0.0;
};

inline void require_family_point(const FamilyPoint& pt) {
  // The sum check allows rounding of grid coordinates such as 0.7 + 0.3.
  if (!(pt.xi >= 0.0) || !(pt.gamma >= 0.0) || !(pt.xi + pt.gamma <= 1.0 + kConstructionTol))
    throw InvalidInput("family point requires xi, gamma >= 0 and xi + gamma <= 1 (got " +
                       std::to_string(pt.xi) + ", " + std::to_string(pt.gamma) + ")");
}

inline BehaviorBox family_box(FamilyPoint pt) {
  require_family_point(pt);
  const double rest = std::max(0.0, 1.0 - pt.xi - pt.gamma);
  const BehaviorBox pr = pr_box(), pc = correlated_box(), pf = facet_box();
  std::vector<double> p(16);
  for (std::size_t i = 0; i < 16; ++i) p[i] = pt.xi * pr[i] + pt.gamma * pc[i] + rest * pf[i];
  return BehaviorBox::checked(kBinaryShape, std::move(p));
}

inline BehaviorBox iso_box(double xi) { return family_box({xi, 0.0}); }
inline BehaviorBox nlc_box(double xi) { return family_box({xi, 1.0 - xi}); }

inline BehaviorBox make_named_box(NamedBox name) {
  switch (name) {
    case NamedBox::PR: return pr_box();
    case NamedBox::PC: return correlated_box();
    case NamedBox::PF: return facet_box();
    case NamedBox::WhiteNoise: return white_noise_box();
    case NamedBox::TsirelsonIso: return iso_box(std::sqrt(2.0) - 1.0);
  }
  throw InvalidInput("unknown box name");
}

inline BehaviorBox make_named_box(std::string_view name) {
  return make_named_box(parse_named_box(name));
}

/// Convex combination sum_k w_k * boxes_k of boxes sharing one shape.
inline BehaviorBox mixture(std::span<const BehaviorBox> boxes, std::span<const double> weights) {
  if (boxes.empty() || boxes.size() != weights.size())
    throw InvalidInput("mixture needs one weight per box");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidInput("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > kConstructionTol) throw InvalidInput("mixture weights must sum to 1");
  std::vector<double> p(boxes.front().shape().size(), 0.0);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (boxes[k].shape() != boxes.front().shape()) throw InvalidInput("mixture shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += weights[k] * boxes[k][i];
  }
  return BehaviorBox(boxes.front().shape(), std::move(p));
}

// ---------------------------------------------------------------------------
// Products.

/// Product box with copy 1 as the high-order digit of every packed index.
inline BehaviorBox tensor_product(const BehaviorBox& p1, const BehaviorBox& p2) {
  require_valid(p1);
  require_valid(p2);
  const BoxShape s1 = p1.shape(), s2 = p2.shape();
  const BoxShape s{s1.x_card * s2.x_card, s1.y_card * s2.y_card, s1.a_card * s2.a_card,
                   s1.b_card * s2.b_card};
  std::vector<double> p(s.size());
  for (std::size_t x1 = 0; x1 < s1.x_card; ++x1)
    for (std::size_t x2 = 0; x2 < s2.x_card; ++x2)
      for (std::size_t y1 = 0; y1 < s1.y_card; ++y1)
        for (std::size_t y2 = 0; y2 < s2.y_card; ++y2)
          for (std::size_t a1 = 0; a1 < s1.a_card; ++a1)
            for (std::size_t a2 = 0; a2 < s2.a_card; ++a2)
              for (std::size_t b1 = 0; b1 < s1.b_card; ++b1)
                for (std::size_t b2 = 0; b2 < s2.b_card; ++b2)
                  p[s.index(x1 * s2.x_card + x2, y1 * s2.y_card + y2, a1 * s2.a_card + a2,
                            b1 * s2.b_card + b2)] = p1(x1, y1, a1, b1) * p2(x2, y2, a2, b2);
  return BehaviorBox(s, std::move(p));
}

// ---------------------------------------------------------------------------
// CHSH functionals.
//
// Placement k = 4*alpha + 2*beta + gamma evaluates
//   S_k = sum_xy (-1)^(xy + alpha x + beta y + gamma) E_xy,
// with E_xy = sum_ab (-1)^(a+b) p(ab|xy). Placement 0 is the canonical
// E00 + E01 + E10 - E11.

struct ChshSummary {
  std::array<double, 8> values{};
  std::size_t best = 0;  // lexicographically first maximizer
  double s_max() const { return values[best]; }
};

inline std::array<double, 4> correlators(const BehaviorBox& box) {
  require_binary(box);
  std::array<double, 4> e{};
  for (unsigned x = 0; x < 2; ++x)
    for (unsigned y = 0; y < 2; ++y) {
      double v = 0.0;
      for (unsigned a = 0; a < 2; ++a)
        for (unsigned b = 0; b < 2; ++b) v += detail::parity_sign(a ^ b) * box(x, y, a, b);
      e[2 * x + y] = v;
    }
  return e;
}

inline int chsh_sign(std::size_t placement, unsigned x, unsigned y) {
  const unsigned alpha = (placement >> 2) & 1u, beta = (placement >> 1) & 1u,
                 gamma = placement & 1u;
  return detail::parity_sign((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma);
}

inline ChshSummary chsh_values(const BehaviorBox& box) {
  const std::array<double, 4> e = correlators(box);
  ChshSummary out;
  for (std::size_t k = 0; k < 8; ++k) {
    double s = 0.0;
    for (unsigned x = 0; x < 2; ++x)
      for (unsigned y = 0; y < 2; ++y) s += chsh_sign(k, x, y) * e[2 * x + y];
    out.values[k] = s;
    if (s > out.values[out.best]) out.best = k;
  }
  return out;
}

/// Non-local cost of a binary no-signaling box from its largest CHSH value.
inline double closed_form_cost(const BehaviorBox& box) {
  require_binary(box);
  return std::max(0.0, (chsh_values(box).s_max() - 2.0) / 2.0);
}

// ---------------------------------------------------------------------------
// Relabelings.

struct PartyRelabeling {
  std::vector<std::size_t> input_perm;                // x -> x'
  std::vector<std::vector<std::size_t>> output_perm;  // [x][a] -> a'
};

struct Relabeling {
  PartyRelabeling alice;
  PartyRelabeling bob;

  static Relabeling identity(const BoxShape& s) {
    auto party = [](std::size_t inputs, std::size_t outputs) {
      PartyRelabeling r;
      for (std::size_t i = 0; i < inputs; ++i) {
        r.input_perm.push_back(i);
        std::vector<std::size_t> o(outputs);
        for (std::size_t k = 0; k < outputs; ++k) o[k] = k;
        r.output_perm.push_back(std::move(o));
      }
      return r;
    };
    return {party(s.x_card, s.a_card), party(s.y_card, s.b_card)};
  }
};

namespace detail {

inline bool is_permutation_of_iota(const std::vector<std::size_t>& v, std::size_t n) {
  if (v.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t k : v) {
    if (k >= n || seen[k]) return false;
    seen[k] = true;
  }
  return true;
}

inline void check_party(const PartyRelabeling& r, std::size_t inputs, std::size_t outputs) {
  if (!is_permutation_of_iota(r.input_perm, inputs) || r.output_perm.size() != inputs)
    throw InvalidInput("relabeling input permutation does not match box dimensions");
  for (const auto& o : r.output_perm)
    if (!is_permutation_of_iota(o, outputs))
      throw InvalidInput("relabeling output permutation does not match box dimensions");
}

}  // namespace detail

/// P'(sigma_x(a) tau_y(b) | pi(x) rho(y)) = P(ab|xy).
inline BehaviorBox relabel(const BehaviorBox& box, const Relabeling& r) {
  const BoxShape& s = box.shape();
  detail::check_party(r.alice, s.x_card, s.a_card);
  detail::check_party(r.bob, s.y_card, s.b_card);
  std::vector<double> p(s.size());
  for (std::size_t x = 0; x < s.x_card; ++x)
    for (std::size_t y = 0; y < s.y_card; ++y)
      for (std::size_t a = 0; a < s.a_card; ++a)
        for (std::size_t b = 0; b < s.b_card; ++b)
          p[s.index(r.alice.input_perm[x], r.bob.input_perm[y], r.alice.output_perm[x][a],
                    r.bob.output_perm[y][b])] = box(x, y, a, b);
  return BehaviorBox(s, std::move(p));
}

/// Binary relabeling with x -> x+input_flip and a -> a + (slope*x + offset),
/// all mod 2 (and likewise for Bob).
inline Relabeling binary_relabeling(unsigned alice_input_flip, unsigned alice_slope,
                                    unsigned alice_offset, unsigned bob_input_flip,
                                    unsigned bob_slope, unsigned bob_offset) {
  auto party = [](unsigned flip, unsigned slope, unsigned offset) {
    PartyRelabeling r;
    for (unsigned x = 0; x < 2; ++x) {
      r.input_perm.push_back(x ^ (flip & 1u));
      const unsigned shift = ((slope & x) ^ offset) & 1u;
      r.output_perm.push_back({shift, 1u ^ shift});
    }
    return r;
  };
  return {party(alice_input_flip, alice_slope, alice_offset),
          party(bob_input_flip, bob_slope, bob_offset)};
}

// ---------------------------------------------------------------------------
// Twirling.

/// Box queried at (x+alpha, y+beta) with outputs post-processed as
/// a = a' + beta x + alpha beta + gamma, b = b' + alpha y + gamma.
/// Each such operation preserves a + b + xy and hence the canonical CHSH value.
inline BehaviorBox twirl_element(const BehaviorBox& box, unsigned alpha, unsigned beta,
                                 unsigned gamma) {
  return detail::binary_box_from([&](unsigned x, unsigned y, unsigned a, unsigned b) {
    const unsigned a_src = a ^ (beta & x) ^ (alpha & beta) ^ gamma;
    const unsigned b_src = b ^ (alpha & y) ^ gamma;
    return box(x ^ alpha, y ^ beta, a_src, b_src);
  });
}

/// Maps a binary no-signaling box to the isotropic box with the same S_max.
inline BehaviorBox twirl(const BehaviorBox& box) {
  require_binary(box);
  require_valid(box);
  // Output relabeling a -> a + alpha x + gamma, b -> b + beta y moves the
  // maximal placement onto the canonical one.
  const std::size_t k = chsh_values(box).best;
  const unsigned alpha = (k >> 2) & 1u, beta = (k >> 1) & 1u, gamma = k & 1u;
  const BehaviorBox aligned = relabel(box, binary_relabeling(0, alpha, gamma, 0, beta, 0));
  std::vector<double> p(16, 0.0);
  for (unsigned t = 0; t < 8; ++t) {
    const BehaviorBox moved = twirl_element(aligned, (t >> 2) & 1u, (t >> 1) & 1u, t & 1u);
    for (std::size_t i = 0; i < 16; ++i) p[i] += moved[i] / 8.0;
  }
  return BehaviorBox(kBinaryShape, std::move(p));
}

}  // namespace nlbox
