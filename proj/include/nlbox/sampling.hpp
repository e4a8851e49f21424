#pragma once

// Random binary no-signaling boxes, drawn as mixtures of the 24 vertices of
// the binary no-signaling polytope (16 deterministic boxes, 8 PR variants).

#include <random>
#include <vector>

#include "nlbox/box.hpp"

namespace nlbox {

inline BehaviorBox deterministic_binary_box(unsigned alice_fn, unsigned bob_fn) {
  // alice_fn bit x (x=0 high) is Alice's output on input x.
  return detail::binary_box_from([&](unsigned x, unsigned y, unsigned a, unsigned b) {
    const unsigned fa = (alice_fn >> (1 - x)) & 1u, fb = (bob_fn >> (1 - y)) & 1u;
    return (a == fa && b == fb) ? 1.0 : 0.0;
  });
}

/// PR box whose violated CHSH placement is `placement`:
/// a + b = xy + alpha x + beta y + gamma.
inline BehaviorBox pr_variant(std::size_t placement) {
  const unsigned alpha = (placement >> 2) & 1u, beta = (placement >> 1) & 1u,
                 gamma = placement & 1u;
  return detail::binary_box_from([&](unsigned x, unsigned y, unsigned a, unsigned b) {
    return ((a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma)) ? 0.5 : 0.0;
  });
}

inline std::vector<BehaviorBox> binary_ns_vertices() {
  std::vector<BehaviorBox> v;
  for (unsigned fa = 0; fa < 4; ++fa)
    for (unsigned fb = 0; fb < 4; ++fb) v.push_back(deterministic_binary_box(fa, fb));
  for (std::size_t k = 0; k < 8; ++k) v.push_back(pr_variant(k));
  return v;
}

/// Sparse random mixture of 1..6 polytope vertices with exponential
/// weights; covers local, facet and strongly non-local regions.
template <class Rng>
BehaviorBox random_binary_ns_box(Rng& rng) {
  static const std::vector<BehaviorBox> vertices = binary_ns_vertices();
  std::uniform_int_distribution<std::size_t> count(1, 6), pick(0, vertices.size() - 1);
  std::exponential_distribution<double> weight(1.0);
  const std::size_t k = count(rng);
  std::vector<BehaviorBox> parts;
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    parts.push_back(vertices[pick(rng)]);
    w.push_back(weight(rng));
    total += w.back();
  }
  for (double& v : w) v /= total;
  return mixture(parts, w);
}

template <class Rng>
FamilyPoint random_family_point(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double xi = u(rng), gamma = u(rng);
  if (xi + gamma > 1.0) {
    xi = 1.0 - xi;
    gamma = 1.0 - gamma;
  }
  return {xi, gamma};
}

}  // namespace nlbox
