#pragma once

// Non-local cost C(P) = 1 - p_L*, where p_L* is the largest total weight of
// deterministic local strategies fitting under P entrywise:
//
//   max sum_j q_j   s.t.   sum_j q_j D_j <= P,  q >= 0.
//
// Two routes to the same program:
//   dense-dual     every strategy column is materialized and every dual
//                  constraint is priced at each pivot;
//   cutting-plane  a restricted master over a growing column pool; violated
//                  dual constraints are separated per Alice function, since
//                  for fixed f_A the lightest f_B splits over Bob's inputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "nlbox/box.hpp"
#include "nlbox/certify.hpp"
#include "nlbox/epr2_types.hpp"
#include "nlbox/simplex.hpp"
#include "nlbox/strategies.hpp"

namespace nlbox {

namespace detail {

/// Box entries with zero mass. A strategy touching one is pinned at weight 0,
/// so pricing skips it; the certificate gives these entries dual weight 1.
inline std::vector<bool> zero_rows(std::span<const double> rhs) {
  std::vector<bool> z(rhs.size());
  for (std::size_t e = 0; e < rhs.size(); ++e) z[e] = rhs[e] == 0.0;
  return z;
}

inline bool touches(const std::vector<std::uint32_t>& rows, const std::vector<bool>& blocked) {
  return std::any_of(rows.begin(), rows.end(), [&](std::uint32_t e) { return blocked[e]; });
}

/// Full pricing over materialized strategy columns that avoid blocked rows;
/// key = position in ascending strategy order.
class DenseStrategyPricer {
 public:
  DenseStrategyPricer(const StrategySpace& space, const std::vector<bool>& blocked)
      : width_(space.shape().x_card * space.shape().y_card) {
    std::vector<std::uint32_t> rows;
    for (std::uint64_t j = 0; j < space.count(); ++j) {
      space.support(j, rows);
      if (touches(rows, blocked)) continue;
      strategies_.push_back(j);
      rows_.insert(rows_.end(), rows.begin(), rows.end());
    }
    count_ = strategies_.size();
  }

  std::uint64_t strategy(std::uint64_t key) const { return strategies_[key]; }

  /// Dantzig pricing is partial: sections of `kSection` columns are scanned
  /// in rotation and the best column of the first section holding an
  /// improving one is returned. A full cycle without one proves optimality.
  std::optional<PricedColumn> price(std::span<const double> y, PricingRule rule, double tol) {
    if (rule == PricingRule::Bland) {
      for (std::uint64_t j = 0; j < count_; ++j) {
        const double rc = reduced_cost(y, j);
        if (rc > tol) return PricedColumn{j, rc};
      }
      return std::nullopt;
    }
    const std::uint64_t sections = (count_ + kSection - 1) / kSection;
    for (std::uint64_t step = 0; step < sections; ++step) {
      const std::uint64_t section = (cursor_ + step) % sections;
      std::optional<PricedColumn> best;
      const std::uint64_t end = std::min(count_, (section + 1) * kSection);
      for (std::uint64_t j = section * kSection; j < end; ++j) {
        const double rc = reduced_cost(y, j);
        if (rc > tol && (!best || rc > best->reduced_cost)) best = PricedColumn{j, rc};
      }
      if (best) {
        cursor_ = section + 1;
        return best;
      }
    }
    return std::nullopt;
  }

  void support(std::uint64_t key, std::vector<std::uint32_t>& rows) const {
    rows.assign(rows_.begin() + static_cast<std::ptrdiff_t>(key * width_),
                rows_.begin() + static_cast<std::ptrdiff_t>((key + 1) * width_));
  }

 private:
  static constexpr std::uint64_t kSection = 4096;

  double reduced_cost(std::span<const double> y, std::uint64_t j) const {
    const std::uint32_t* r = &rows_[j * width_];
    double mass = 0.0;
    for (std::size_t k = 0; k < width_; ++k) mass += y[r[k]];
    return 1.0 - mass;
  }

  std::size_t width_;
  std::uint64_t count_ = 0;
  std::uint64_t cursor_ = 0;
  std::vector<std::uint64_t> strategies_;
  std::vector<std::uint32_t> rows_;
};

/// Restricted master columns; key = position in the pool.
class PoolPricer {
 public:
  explicit PoolPricer(const StrategySpace& space) : space_(space) {}

  bool contains(std::uint64_t strategy) const { return position_.count(strategy) != 0; }

  void add(std::uint64_t strategy) {
    if (contains(strategy)) return;
    position_.emplace(strategy, strategies_.size());
    strategies_.push_back(strategy);
    std::vector<std::uint32_t> rows;
    space_.support(strategy, rows);
    width_ = rows.size();
    rows_.insert(rows_.end(), rows.begin(), rows.end());
  }

  std::size_t size() const { return strategies_.size(); }
  std::uint64_t strategy(std::uint64_t key) const { return strategies_[key]; }

  std::optional<PricedColumn> price(std::span<const double> y, PricingRule rule, double tol) {
    std::optional<PricedColumn> best;
    for (std::uint64_t k = 0; k < strategies_.size(); ++k) {
      double mass = 0.0;
      for (std::size_t i = 0; i < width_; ++i) mass += y[rows_[k * width_ + i]];
      const double rc = 1.0 - mass;
      if (rc <= tol) continue;
      if (rule == PricingRule::Bland) return PricedColumn{k, rc};
      if (!best || rc > best->reduced_cost) best = PricedColumn{k, rc};
    }
    return best;
  }

  void support(std::uint64_t key, std::vector<std::uint32_t>& rows) const {
    rows.assign(rows_.begin() + static_cast<std::ptrdiff_t>(key * width_),
                rows_.begin() + static_cast<std::ptrdiff_t>((key + 1) * width_));
  }

 private:
  const StrategySpace& space_;
  std::vector<std::uint64_t> strategies_;
  std::unordered_map<std::uint64_t, std::size_t> position_;
  std::vector<std::uint32_t> rows_;
  std::size_t width_ = 0;
};

struct SeparatedStrategy {
  std::uint64_t strategy = 0;
  double mass = 0.0;  // y on the strategy's support
};

/// For every Alice function, the Bob function minimizing the dual mass.
/// Returned in Alice order. Entries with infinite weight are never chosen
/// unless no alternative exists, in which case the mass is infinite.
inline std::vector<SeparatedStrategy> separate(const StrategySpace& space,
                                               std::span<const double> y) {
  const BoxShape& s = space.shape();
  std::vector<SeparatedStrategy> out;
  out.reserve(space.alice_count());
  std::vector<std::uint32_t> fa;
  std::vector<std::uint32_t> fb(s.y_card);
  for (std::uint64_t ja = 0; ja < space.alice_count(); ++ja) {
    space.decode_party(ja, s.x_card, s.a_card, fa);
    double total = 0.0;
    for (std::size_t yy = 0; yy < s.y_card; ++yy) {
      double low = INFINITY;
      for (std::size_t b = 0; b < s.b_card; ++b) {
        double mass = 0.0;
        for (std::size_t x = 0; x < s.x_card; ++x) mass += y[s.index(x, yy, fa[x], b)];
        if (mass < low) {
          low = mass;
          fb[yy] = static_cast<std::uint32_t>(b);
        }
      }
      total += low;
    }
    out.push_back({space.encode(fa, fb), total});
  }
  return out;
}

inline double min_dual_mass(const StrategySpace& space, std::span<const double> y) {
  double low = INFINITY;
  for (const SeparatedStrategy& s : separate(space, y)) low = std::min(low, s.mass);
  return low;
}

inline std::vector<double> certificate_duals(const PackingSimplex& lp,
                                             const std::vector<bool>& blocked) {
  std::vector<double> w(lp.duals().begin(), lp.duals().end());
  for (std::size_t e = 0; e < w.size(); ++e) w[e] = blocked[e] ? 1.0 : std::max(0.0, w[e]);
  return w;
}

/// Bounds from a possibly unfinished basis: the primal objective and the
/// rescaled dual.
inline std::pair<double, double> cost_bounds(const StrategySpace& space, const BehaviorBox& box,
                                             const PackingSimplex& lp,
                                             const std::vector<bool>& blocked) {
  const std::vector<double> w = certificate_duals(lp, blocked);
  const double mass = min_dual_mass(space, w);
  double lower = 0.0;
  if (mass > 0.0) {
    double pw = 0.0;
    for (std::size_t e = 0; e < w.size(); ++e) pw += box[e] * w[e];
    lower = std::clamp(1.0 - pw / mass, 0.0, 1.0);
  }
  return {lower, std::clamp(1.0 - lp.objective(), 0.0, 1.0)};
}

}  // namespace detail

inline Epr2Result epr2_cost(const BehaviorBox& box, const Epr2Options& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  require_valid(box);
  const StrategySpace space(box.shape());
  if (space.count() > opts.strategy_cap)
    throw InvalidInput("box has " + std::to_string(space.count()) +
                       " deterministic strategies, above the cap of " +
                       std::to_string(opts.strategy_cap));

  std::vector<double> rhs(box.values().begin(), box.values().end());
  for (double& v : rhs) v = std::max(0.0, v);
  const std::vector<bool> blocked = detail::zero_rows(rhs);
  SimplexOptions sopts;
  sopts.iteration_cap = opts.iteration_cap;
  sopts.optimality_tol = std::min(1e-11, opts.tolerance * 1e-2);
  PackingSimplex lp(rhs, sopts);

  Epr2Result result;
  result.shape = box.shape();
  result.status.mode = opts.mode;
  std::vector<std::pair<std::uint64_t, double>> solution;

  auto fail = [&](const char* what) {
    const auto [lo, hi] = detail::cost_bounds(space, box, lp, blocked);
    throw SolverError(what, lo, hi);
  };

  if (opts.mode == LpMode::DenseDual) {
    detail::DenseStrategyPricer pricer(space, blocked);
    if (lp.run(pricer) != SimplexOutcome::Optimal) fail("simplex hit the iteration cap");
    for (auto [key, value] : lp.structural_solution())
      solution.emplace_back(pricer.strategy(key), value);
  } else {
    detail::PoolPricer pool(space);
    for (;;) {
      if (lp.run(pool) != SimplexOutcome::Optimal) fail("simplex hit the iteration cap");
      ++result.status.separation_rounds;
      std::vector<double> y(lp.duals().begin(), lp.duals().end());
      for (std::size_t e = 0; e < y.size(); ++e)
        if (blocked[e]) y[e] = INFINITY;
      std::vector<detail::SeparatedStrategy> cuts = detail::separate(space, y);
      std::erase_if(cuts, [&](const detail::SeparatedStrategy& c) {
        return 1.0 - c.mass <= sopts.optimality_tol || pool.contains(c.strategy);
      });
      if (cuts.empty()) break;
      std::stable_sort(cuts.begin(), cuts.end(),
                       [](const auto& l, const auto& r) { return l.mass < r.mass; });
      if (cuts.size() > opts.cut_batch) cuts.resize(opts.cut_batch);
      for (const auto& c : cuts) pool.add(c.strategy);
    }
    result.status.columns_generated = pool.size();
    for (auto [key, value] : lp.structural_solution())
      solution.emplace_back(pool.strategy(key), value);
    std::sort(solution.begin(), solution.end());
  }

  result.status.iterations = lp.iterations();
  result.status.bland_pivots = lp.bland_pivots();
  for (auto [j, v] : solution) result.mixture.push_back({j, v});
  for (const MixtureWeight& m : result.mixture) result.local_weight += m.weight;
  result.local_weight = std::clamp(result.local_weight, 0.0, 1.0);
  result.cost = 1.0 - result.local_weight;

  double min_w = 0.0;
  for (std::size_t e = 0; e < blocked.size(); ++e)
    if (!blocked[e]) min_w = std::min(min_w, lp.duals()[e]);
  result.dual_certificate = detail::certificate_duals(lp, blocked);

  // Diagnostics against the original box.
  std::vector<double> load(box.shape().size(), 0.0);
  std::vector<std::uint32_t> rows;
  for (const MixtureWeight& m : result.mixture) {
    space.support(m.strategy, rows);
    for (std::uint32_t e : rows) load[e] += m.weight;
  }
  for (std::size_t e = 0; e < load.size(); ++e)
    result.status.primal_residual = std::max(result.status.primal_residual, load[e] - box[e]);
  const double mass = detail::min_dual_mass(space, result.dual_certificate);
  result.status.dual_residual = std::max({0.0, 1.0 - mass, -min_w});
  double pw = 0.0;
  for (std::size_t e = 0; e < load.size(); ++e) pw += box[e] * result.dual_certificate[e];
  result.status.duality_gap = std::abs(pw - result.local_weight);

  const auto stop = std::chrono::steady_clock::now();
  result.status.seconds = std::chrono::duration<double>(stop - start).count();

  if (result.status.primal_residual > opts.tolerance ||
      result.status.dual_residual > opts.tolerance || result.status.duality_gap > opts.tolerance)
    throw SolverError("LP optimum failed verification (primal " +
                          std::to_string(result.status.primal_residual) + ", dual " +
                          std::to_string(result.status.dual_residual) + ", gap " +
                          std::to_string(result.status.duality_gap) + ")",
                      std::max(0.0, 1.0 - pw / std::max(mass, 1e-300)), result.cost);

  if (opts.certify) result.status.certificate = certify(box, result, opts.denominator_cap);
  return result;
}

inline Epr2Result epr2_cost_two_copies(const BehaviorBox& p1, const BehaviorBox& p2,
                                       const Epr2Options& opts = {}) {
  require_binary(p1);
  require_binary(p2);
  return epr2_cost(tensor_product(p1, p2), opts);
}

/// The non-local part (P - sum_j q_j D_j) / (1 - p_L), when p_L < 1.
inline std::optional<BehaviorBox> nonlocal_part(const BehaviorBox& box, const Epr2Result& r) {
  if (r.cost <= 1e-12) return std::nullopt;
  const StrategySpace space(box.shape());
  std::vector<double> p(box.values().begin(), box.values().end());
  std::vector<std::uint32_t> rows;
  for (const MixtureWeight& m : r.mixture) {
    space.support(m.strategy, rows);
    for (std::uint32_t e : rows) p[e] -= m.weight;
  }
  for (double& v : p) v /= r.cost;
  return BehaviorBox(box.shape(), std::move(p));
}

}  // namespace nlbox
