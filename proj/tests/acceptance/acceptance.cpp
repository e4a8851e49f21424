// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional argument: directory for the region scan outputs (default ".").

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <thread>

#include "nlbox/box.hpp"
#include "nlbox/distill.hpp"
#include "nlbox/epr2.hpp"
#include "nlbox/experiments.hpp"
#include "nlbox/sampling.hpp"
#include "nlbox/wiring.hpp"

using namespace nlbox;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

template <class Rng>
PartyWiring random_wiring(Rng& rng) {
  return raw_party_wiring(std::uniform_int_distribution<std::size_t>(0, kRawPartyWirings - 1)(rng));
}

Outcome family_cost() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  const auto pts = grid_points({0.05, {}});
  for (const GridPoint& g : pts)
    worst = std::max(worst, std::abs(epr2_cost(family_box(g.point)).cost - g.point.xi));
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t <= 60.0 && pts.size() == 231,
          "max |C - xi| = " + num(worst, 3) + " over " + std::to_string(pts.size()) + " points in " +
              num(t, 3) + " s (limits 1e-9, 60 s)"};
}

Outcome closed_form_equivalence() {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    worst = std::max(worst, std::abs(epr2_cost(p).cost - closed_form_cost(p)));
  }
  return {worst <= 1e-8, "max |LP - closed form| = " + num(worst, 3) + " over 1000 boxes (limit 1e-8)"};
}

Outcome activation_formula(const ActivationReport& r) {
  double worst = 0.0;
  for (const ActivationCell& c : r.cells) worst = std::max(worst, c.deviation);
  return {r.cells.size() == 81 && worst <= 1e-9,
          "max deviation " + num(worst, 3) + " over " + std::to_string(r.cells.size()) +
              " cells (limit 1e-9)"};
}

Outcome activation_strictness(const ActivationReport& r) {
  std::size_t cells = 0, violations = 0;
  double min_gain = INFINITY;
  for (const ActivationCell& c : r.cells) {
    if (!(0.0 < c.xi_prime && c.xi_prime <= c.xi + 1e-12 && c.xi < 1.0)) continue;
    ++cells;
    min_gain = std::min(min_gain, c.measured - c.xi);
    if (!(c.measured > c.xi)) ++violations;
  }
  return {cells == 45 && violations == 0,
          std::to_string(cells) + " cells with xi' <= xi, min C(P') - xi = " + num(min_gain, 3) +
              ", violations " + std::to_string(violations)};
}

Outcome isotropic_undistillable() {
  SearchOptions o;
  o.workers = worker_count();
  std::string detail;
  bool pass = true;
  double slowest = 0.0;
  for (double xi : {0.2, 0.5, std::sqrt(2.0) - 1.0, 0.9}) {
    const SearchResult r = distillable_2copy(iso_box(xi), iso_box(xi), o);
    pass = pass && std::abs(r.d_value - xi) <= 1e-9;
    slowest = std::max(slowest, r.elapsed.count());
    detail += "D(" + num(xi, 4) + ")-xi=" + num(r.d_value - xi, 2) + " ";
  }
  pass = pass && slowest <= 600.0;
  return {pass, detail + "slowest search " + num(slowest, 3) + " s (limits 1e-9, 600 s)"};
}

Outcome correlated_distillable() {
  SearchOptions o;
  o.workers = worker_count();
  std::string detail;
  bool pass = true;
  for (double xi : {0.1, 0.2, 0.3, 0.4}) {
    const SearchResult r = distillable_2copy(nlc_box(xi), nlc_box(xi), o);
    const double fww = 2 * xi * (1 - xi), bs = xi + xi * (1 - xi) / 2;
    pass = pass && r.d_value >= fww - 1e-12 && fww > xi && r.d_value >= bs - 1e-12;
    detail += "D(" + num(xi, 2) + ")=" + num(r.d_value, 8) + " ";
  }
  return {pass, detail + "(needs >= 2xi(1-xi) > xi and >= xi+xi(1-xi)/2)"};
}

Outcome inequality_chain(const std::vector<RegionRow>& rows) {
  std::size_t bad = 0, failed = 0;
  double worst = 0.0;
  for (const RegionRow& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      continue;
    }
    const RegionClassification& c = r.result;
    const double v = std::max({c.c1 - c.d2, c.d2 - c.c2, c.c2 - (1 - (1 - c.c1) * (1 - c.c1))});
    worst = std::max(worst, v);
    if (v > 1e-7) ++bad;
  }
  return {!rows.empty() && bad == 0 && failed == 0,
          std::to_string(rows.size()) + " points, worst excess " + num(worst, 3) + ", violations " +
              std::to_string(bad) + ", solver failures " + std::to_string(failed) + " (limit 1e-7)"};
}

Outcome region_reproduction(const std::vector<RegionRow>& rows, double seconds) {
  const RegionCounts n = count_regions(rows);
  bool edge_ok = true, pr_ok = false;
  std::size_t edge = 0;
  for (const RegionRow& r : rows) {
    const RegionClassification& c = r.result;
    if (r.grid.i > 0 && c.xi <= 0.2 + 1e-12 && std::abs(c.xi + c.gamma - 1.0) < 1e-12) {
      ++edge;
      edge_ok = edge_ok && c.label == Region::I;
    }
    if (c.xi == 1.0 && c.gamma == 0.0) pr_ok = c.label == Region::III;
  }
  const double ambiguous = rows.empty() ? 1.0 : double(n.ambiguous) / rows.size();
  return {n.region_i > 0 && n.region_ii > 0 && n.region_iii > 0 && edge_ok && edge > 0 && pr_ok &&
              ambiguous <= 0.02 && rows.size() == 1326 && seconds <= 12 * 3600.0,
          "I=" + std::to_string(n.region_i) + " II=" + std::to_string(n.region_ii) +
              " III=" + std::to_string(n.region_iii) + " AMBIGUOUS=" + std::to_string(n.ambiguous) +
              " (" + num(100 * ambiguous, 3) + "%), NLC edge xi<=0.2 in I: " +
              (edge_ok ? "yes" : "no") + ", PR in III: " + (pr_ok ? "yes" : "no") + ", " +
              num(seconds, 4) + " s on " + std::to_string(worker_count()) + " worker(s)"};
}

Outcome isotropic_two_copy_cost() {
  std::string detail;
  bool pass = true;
  for (double xi : {0.2, 0.5, std::sqrt(2.0) - 1.0}) {
    const BehaviorBox p = iso_box(xi);
    const Epr2Result r = epr2_cost_two_copies(p, p);
    const double dev = r.cost - xi;
    detail += "c2(" + num(xi, 4) + ")-xi=" + num(dev, 2) + " ";
    if (std::abs(dev) > 1e-7) {
      pass = false;
      const CertifiedBounds c = certify(tensor_product(p, p), r);
      detail += "[certified " + num(c.lower, 12) + ", " + num(c.upper, 12) + "] ";
    }
  }
  return {pass, detail + "(limit 1e-7)"};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(77);
  const auto& cat = WiringCatalog::instance();
  std::uniform_int_distribution<std::size_t> id(0, cat.size() - 1);
  double kernel_worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const BehaviorBox p1 = random_binary_ns_box(rng), p2 = random_binary_ns_box(rng);
    const StrategyTensor a = cat.tensor(id(rng)), b = cat.tensor(id(rng));
    const double fast = kernel_cost(fast_eval_kernels(p1, p2), a, b);
    const double naive = closed_form_cost(apply_wiring(cat.representative(cat.id_of(a).value()),
                                                       cat.representative(cat.id_of(b).value()), p1, p2));
    kernel_worst = std::max(kernel_worst, std::abs(fast - naive));
  }
  Epr2Options dense;
  dense.mode = LpMode::DenseDual;
  double lp_worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    BehaviorBox p1, p2;
    if (t < 10) {
      p1 = family_box(random_family_point(rng));
      p2 = t % 2 ? p1 : family_box(random_family_point(rng));
    } else {
      p1 = random_binary_ns_box(rng);
      p2 = random_binary_ns_box(rng);
    }
    const double a = epr2_cost_two_copies(p1, p2).cost;
    const double b = epr2_cost_two_copies(p1, p2, dense).cost;
    lp_worst = std::max(lp_worst, std::abs(a - b));
  }
  return {kernel_worst <= 1e-12 && lp_worst <= 1e-9,
          "kernel vs apply_wiring " + num(kernel_worst, 3) + " on 100 samples (limit 1e-12); "
          "cutting-plane vs dense " + num(lp_worst, 3) + " on 50 two-copy LPs (limit 1e-9)"};
}

Outcome property_suites() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<unsigned> bit(0, 1);
  std::size_t closure = 0, twirl_bad = 0, relabel_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox out = apply_wiring(random_wiring(rng), random_wiring(rng),
                                         random_binary_ns_box(rng), random_binary_ns_box(rng));
    if (!validate(out).accepted()) ++closure;
  }
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    const double c = closed_form_cost(p);
    if (c > 0 && std::abs(closed_form_cost(twirl(p)) - c) > 1e-12) ++twirl_bad;
  }
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    const Relabeling r = binary_relabeling(bit(rng), bit(rng), bit(rng), bit(rng), bit(rng), bit(rng));
    auto a = chsh_values(p).values, b = chsh_values(relabel(p, r)).values;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (int k = 0; k < 8; ++k)
      if (std::abs(a[k] - b[k]) > 1e-12) {
        ++relabel_bad;
        break;
      }
  }
  return {closure + twirl_bad + relabel_bad == 0,
          "violations: wiring closure " + std::to_string(closure) + ", twirl cost " +
              std::to_string(twirl_bad) + ", relabel CHSH multiset " + std::to_string(relabel_bad) +
              " (1000 trials each)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : ".";
  std::filesystem::create_directories(out_dir);
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail
              << " [" << num(seconds_since(t0), 3) << " s]" << std::endl;
  };

  report(1, "family cost", family_cost);
  report(2, "closed-form equivalence", closed_form_equivalence);
  ActivationReport activation;
  try {
    ActivationOptions ao;
    ao.search.workers = worker_count();
    activation = run_activation(ao);
  } catch (const std::exception& e) {
    std::cout << "activation run failed: " << e.what() << std::endl;
  }
  report(3, "activation formula", [&] { return activation_formula(activation); });
  report(4, "activation strictness", [&] { return activation_strictness(activation); });
  report(5, "isotropic two-copy undistillability", isotropic_undistillable);
  report(6, "correlated distillability", correlated_distillable);

  std::vector<RegionRow> rows;
  double scan_seconds = 0.0;
  try {
    RegionScanOptions so;
    so.grid.step = 0.02;
    so.workers = worker_count();
    const auto t0 = Clock::now();
    rows = run_region_scan(so);
    scan_seconds = seconds_since(t0);
    std::ofstream csv(out_dir / "acceptance_region.csv");
    write_region_csv(csv, rows);
    std::vector<double> levels;
    for (int k = 1; k < 20; ++k) levels.push_back(0.05 * k);
    const auto contours = c2_contours(rows, levels);
    std::ofstream cc(out_dir / "acceptance_c2_contours.csv");
    write_contours_csv(cc, contours);
    std::ofstream svg(out_dir / "acceptance_region.svg");
    write_region_svg(svg, rows, so.grid.step, contours);
  } catch (const std::exception& e) {
    std::cout << "region scan failed: " << e.what() << std::endl;
  }
  report(7, "inequality chain", [&] { return inequality_chain(rows); });
  report(8, "region reproduction", [&] { return region_reproduction(rows, scan_seconds); });
  report(9, "isotropic two-copy cost", isotropic_two_copy_cost);
  report(10, "oracle equivalence", oracle_equivalence);
  report(11, "property suites", property_suites);

  std::cout << (failures ? "FAILED " : "ALL PASSED ") << 11 - failures << "/11" << std::endl;
  return failures ? 1 : 0;
}
