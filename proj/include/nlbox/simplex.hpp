#pragma once

// Revised primal simplex for packing programs
//
//   maximize  sum_j z_j   subject to   sum_j z_j A_j + s = b,  z, s >= 0,
//
// where every structural column A_j is a 0/1 vector given by its support
// and b >= 0, so the all-slack basis is feasible. Columns are supplied by a
// pricer, which lets the same engine run with full pricing over an explicit
// column set or with columns generated on demand. The dual vector y of the
// final basis certifies optimality: sum_{r in supp A_j} y_r >= 1, y >= 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nlbox/error.hpp"

namespace nlbox {

struct SimplexOptions {
  double optimality_tol = 1e-11;  // minimal reduced cost for an entering column
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-12;
  std::size_t iteration_cap = 200000;
  std::size_t refactor_interval = 400;
  std::size_t stall_threshold = 40;  // degenerate pivots before Bland's rule
};

enum class PricingRule { Dantzig, Bland };

/// Variable identity. Structural variables precede slacks in Bland order.
struct SimplexVar {
  bool slack = false;
  std::uint64_t key = 0;  // structural key or slack row

  friend bool operator<(const SimplexVar& l, const SimplexVar& r) {
    if (l.slack != r.slack) return !l.slack;
    return l.key < r.key;
  }
  friend bool operator==(const SimplexVar&, const SimplexVar&) = default;
};

struct PricedColumn {
  std::uint64_t key = 0;
  double reduced_cost = 0.0;
};

enum class SimplexOutcome { Optimal, IterationCap };

class PackingSimplex {
 public:
  PackingSimplex(std::vector<double> rhs, SimplexOptions options = {})
      : m_(rhs.size()), rhs_(std::move(rhs)), options_(options) {
    if (m_ == 0) throw InvalidInput("simplex needs at least one row");
    for (double v : rhs_)
      if (v < 0.0) throw InvalidInput("packing program needs a non-negative right-hand side");
    basis_.resize(m_);
    basis_rows_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) basis_[r] = {true, r};
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) binv_[r * m_ + r] = 1.0;
    x_ = rhs_;
    y_.assign(m_, 0.0);
  }

  std::size_t rows() const { return m_; }
  std::size_t iterations() const { return iterations_; }
  std::size_t degenerate_pivots() const { return degenerate_pivots_; }
  std::size_t bland_pivots() const { return bland_pivots_; }
  PricingRule rule() const { return rule_; }
  const std::vector<double>& duals() const { return y_; }
  SimplexOptions& options() { return options_; }

  double objective() const {
    double v = 0.0;
    for (std::size_t i = 0; i < m_; ++i)
      if (!basis_[i].slack) v += x_[i];
    return v;
  }

  /// Basic structural variables and their values.
  std::vector<std::pair<std::uint64_t, double>> structural_solution() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (std::size_t i = 0; i < m_; ++i)
      if (!basis_[i].slack && x_[i] > 0.0) out.emplace_back(basis_[i].key, x_[i]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Pivots until the pricer reports no improving column.
  ///
  /// Pricer requirements:
  ///   std::optional<PricedColumn> price(std::span<const double> y, PricingRule, double tol)
  ///     Dantzig: column of largest reduced cost 1 - y(supp) above tol;
  ///     Bland: smallest key with reduced cost above tol.
  ///   void support(std::uint64_t key, std::vector<std::uint32_t>& rows)
  template <class Pricer>
  SimplexOutcome run(Pricer& pricer) {
    bool fresh = false;
    std::vector<std::uint32_t> rows;
    std::vector<double> u(m_);
    for (;;) {
      if (iterations_ >= options_.iteration_cap) return SimplexOutcome::IterationCap;
      if (since_refactor_ >= options_.refactor_interval) {
        refactor();
        fresh = true;
      }
      std::optional<SimplexVar> entering = choose_entering(pricer);
      if (!entering) {
        if (fresh) return SimplexOutcome::Optimal;
        // Confirm optimality against a fresh factorization.
        refactor();
        fresh = true;
        continue;
      }
      fresh = false;
      if (entering->slack) {
        rows.assign(1, static_cast<std::uint32_t>(entering->key));
      } else {
        pricer.support(entering->key, rows);
      }
      direction(rows, u);
      const std::optional<std::size_t> leave = ratio_test(u);
      if (!leave) {
        // Packing programs are bounded; an empty ratio test means the pivot
        // tolerance rejected every row. Refactor and retry once.
        if (since_refactor_ == 0)
          throw SolverError("simplex ratio test found no pivot row", 0.0, 1.0);
        refactor();
        continue;
      }
      pivot(*entering, entering_rc_, rows, u, *leave);
    }
  }

  /// Recomputes the basis inverse and primal values from scratch.
  void refactor() {
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m_, m_);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i].slack) {
        basis_matrix(basis_[i].key, i) = 1.0;
      } else {
        for (std::uint32_t r : basis_rows_[i]) basis_matrix(r, i) = 1.0;
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    const Eigen::MatrixXd inv = lu.inverse();
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t c = 0; c < m_; ++c) binv_[i * m_ + c] = inv(i, c);
    for (std::size_t i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = &binv_[i * m_];
      for (std::size_t c = 0; c < m_; ++c) v += row[c] * rhs_[c];
      x_[i] = v < 0.0 ? 0.0 : v;
    }
    since_refactor_ = 0;
    compute_duals();
  }

 private:
  void compute_duals() {
    std::fill(y_.begin(), y_.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i].slack) continue;
      const double* row = &binv_[i * m_];
      for (std::size_t c = 0; c < m_; ++c) y_[c] += row[c];
    }
  }

  template <class Pricer>
  std::optional<SimplexVar> choose_entering(Pricer& pricer) {
    const double tol = options_.optimality_tol;
    const std::optional<PricedColumn> structural = pricer.price(y_, rule_, tol);
    // Slack r has reduced cost -y_r.
    std::optional<std::size_t> slack;
    double slack_rc = tol;
    for (std::size_t r = 0; r < m_; ++r) {
      if (-y_[r] > slack_rc) {
        slack = r;
        if (rule_ == PricingRule::Bland) break;
        slack_rc = -y_[r];
      }
    }
    if (rule_ == PricingRule::Bland) {
      if (structural) {
        entering_rc_ = structural->reduced_cost;
        return SimplexVar{false, structural->key};
      }
      if (slack) {
        entering_rc_ = -y_[*slack];
        return SimplexVar{true, *slack};
      }
      return std::nullopt;
    }
    if (structural && (!slack || structural->reduced_cost >= slack_rc)) {
      entering_rc_ = structural->reduced_cost;
      return SimplexVar{false, structural->key};
    }
    if (slack) {
      entering_rc_ = -y_[*slack];
      return SimplexVar{true, *slack};
    }
    return std::nullopt;
  }

  void direction(const std::vector<std::uint32_t>& rows, std::vector<double>& u) const {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const double* row = &binv_[i * m_];
      double v = 0.0;
      for (std::uint32_t r : rows) v += row[r];
      u[i] = v;
    }
  }

  std::optional<std::size_t> ratio_test(const std::vector<double>& u) const {
    const double ptol = options_.pivot_tol;
    std::optional<std::size_t> best;
    if (rule_ == PricingRule::Bland) {
      double theta = INFINITY;
      for (std::size_t i = 0; i < m_; ++i) {
        if (u[i] <= ptol) continue;
        const double t = x_[i] / u[i];
        if (t < theta - 1e-15) {
          theta = t;
          best = i;
        } else if (t <= theta + 1e-15 && basis_[i] < basis_[*best]) {
          best = i;
        }
      }
      return best;
    }
    // Harris two-pass: bound the step with relaxed feasibility, then take
    // the largest pivot element among rows within that bound.
    double theta_max = INFINITY;
    for (std::size_t i = 0; i < m_; ++i)
      if (u[i] > ptol) theta_max = std::min(theta_max, (x_[i] + options_.feasibility_tol) / u[i]);
    if (!std::isfinite(theta_max)) return std::nullopt;
    double pivot_mag = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (u[i] <= ptol) continue;
      if (x_[i] / u[i] <= theta_max && u[i] > pivot_mag) {
        pivot_mag = u[i];
        best = i;
      }
    }
    return best;
  }

  void pivot(const SimplexVar& entering, double reduced_cost,
             const std::vector<std::uint32_t>& rows, const std::vector<double>& u,
             std::size_t leave) {
    const double before = objective();
    const double theta = std::max(0.0, x_[leave] / u[leave]);
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == leave) continue;
      const double v = x_[i] - theta * u[i];
      x_[i] = v < 0.0 ? 0.0 : v;
    }
    x_[leave] = theta;

    double* prow = &binv_[leave * m_];
    const double inv_pivot = 1.0 / u[leave];
    for (std::size_t c = 0; c < m_; ++c) prow[c] *= inv_pivot;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == leave || u[i] == 0.0) continue;
      double* row = &binv_[i * m_];
      const double f = u[i];
      for (std::size_t c = 0; c < m_; ++c) row[c] -= f * prow[c];
    }
    // y' = y + d_q * (row `leave` of the new inverse).
    for (std::size_t c = 0; c < m_; ++c) y_[c] += reduced_cost * prow[c];
    basis_[leave] = entering;
    basis_rows_[leave] = entering.slack ? std::vector<std::uint32_t>{} : rows;

    ++iterations_;
    ++since_refactor_;
    if (rule_ == PricingRule::Bland) ++bland_pivots_;
    if (objective() <= before + 1e-15) {
      ++degenerate_pivots_;
      if (++stall_ >= options_.stall_threshold) rule_ = PricingRule::Bland;
    } else {
      stall_ = 0;
      rule_ = PricingRule::Dantzig;
    }
  }

  std::size_t m_;
  std::vector<double> rhs_;
  SimplexOptions options_;
  std::vector<SimplexVar> basis_;
  std::vector<std::vector<std::uint32_t>> basis_rows_;
  std::vector<double> binv_;  // row-major basis inverse
  std::vector<double> x_;     // basic values
  std::vector<double> y_;     // duals
  double entering_rc_ = 0.0;
  PricingRule rule_ = PricingRule::Dantzig;
  std::size_t iterations_ = 0;
  std::size_t since_refactor_ = 0;
  std::size_t stall_ = 0;
  std::size_t degenerate_pivots_ = 0;
  std::size_t bland_pivots_ = 0;
};

}  // namespace nlbox
