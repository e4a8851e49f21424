#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlbox/box.hpp"

namespace nlbox {

enum class LpMode { DenseDual, CuttingPlane };

inline LpMode parse_lp_mode(std::string_view s) {
  if (s == "dense-dual") return LpMode::DenseDual;
  if (s == "cutting-plane") return LpMode::CuttingPlane;
  throw InvalidInput("unknown LP mode '" + std::string(s) + "' (dense-dual | cutting-plane)");
}

inline const char* to_string(LpMode m) {
  return m == LpMode::DenseDual ? "dense-dual" : "cutting-plane";
}

struct Epr2Options {
  LpMode mode = LpMode::CuttingPlane;
  double tolerance = kLpTol;
  std::size_t iteration_cap = 200000;
  std::uint64_t strategy_cap = std::uint64_t{1} << 20;
  bool certify = false;
  std::uint64_t denominator_cap = 1'000'000'000'000ULL;
  std::size_t cut_batch = 32;  // strategies added per separation round
};

/// Interval for the cost of the rationalized box, checked in exact arithmetic.
struct CertifiedBounds {
  bool certified = false;       // false when the box could not be rationalized
  bool primal_feasible = false; // mixture as returned satisfies D q <= p exactly
  bool dual_feasible = false;   // certificate as returned has mass >= 1 on every strategy
  double lower = 0.0;
  double upper = 1.0;
  std::string lower_exact;
  std::string upper_exact;
};

struct SolverStatus {
  LpMode mode = LpMode::CuttingPlane;
  std::size_t iterations = 0;
  std::size_t separation_rounds = 0;
  std::size_t columns_generated = 0;
  std::size_t bland_pivots = 0;
  double primal_residual = 0.0;  // max_e (D q - p)_e, clipped at 0
  double dual_residual = 0.0;    // max(1 - min_j w(supp D_j), -min_e w_e), clipped at 0
  double duality_gap = 0.0;
  double seconds = 0.0;
  std::optional<CertifiedBounds> certificate;
};

struct MixtureWeight {
  std::uint64_t strategy = 0;
  double weight = 0.0;
};

struct Epr2Result {
  BoxShape shape;
  double local_weight = 0.0;
  double cost = 1.0;
  std::vector<MixtureWeight> mixture;     // sorted by strategy index
  std::vector<double> dual_certificate;   // one weight per box entry
  SolverStatus status;
};

}  // namespace nlbox
