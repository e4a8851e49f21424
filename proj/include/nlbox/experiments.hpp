#pragma once

// Experiment drivers: region scan over the P(xi, gamma) section, the
// activation table for BS on P_ISO(xi) x P_NLC(xi'), and per-point audits.
// Writers for CSV, SVG heatmap and c2 contour data live here too so that the
// command-line tool stays a thin flag parser.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nlbox/box.hpp"
#include "nlbox/distill.hpp"
#include "nlbox/epr2.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

namespace detail {

inline std::string fmt(double v, int digits = 15) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grid.

struct GridFilter {
  double xi_min = 0.0, xi_max = 1.0;
  double gamma_min = 0.0, gamma_max = 1.0;
};

struct GridSpec {
  double step = 0.02;
  std::optional<GridFilter> filter;
};

struct GridPoint {
  std::size_t i = 0;  // xi = i * step
  std::size_t j = 0;  // gamma = j * step
  FamilyPoint point;
};

/// Lattice points of the simplex xi, gamma >= 0, xi + gamma <= 1, ordered by
/// xi then gamma. When 1/step is an integer n the coordinates are i/n.
inline std::vector<GridPoint> grid_points(const GridSpec& spec) {
  if (!(spec.step > 0.0 && spec.step <= 0.25))
    throw InvalidInput("grid step must lie in (0, 0.25]");
  const double inv = 1.0 / spec.step;
  const double n_round = std::round(inv);
  const bool exact = std::abs(inv - n_round) < 1e-9;
  const auto n = static_cast<std::size_t>(exact ? n_round : std::floor(inv + 1e-9));
  auto coord = [&](std::size_t k) { return exact ? double(k) / n_round : double(k) * spec.step; };
  std::vector<GridPoint> out;
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; i + j <= n; ++j) {
      FamilyPoint pt{coord(i), coord(j)};
      if (!exact && pt.xi + pt.gamma > 1.0 + 1e-12) continue;
      if (spec.filter) {
        const GridFilter& f = *spec.filter;
        if (pt.xi < f.xi_min - 1e-12 || pt.xi > f.xi_max + 1e-12 || pt.gamma < f.gamma_min - 1e-12 ||
            pt.gamma > f.gamma_max + 1e-12)
          continue;
      }
      out.push_back({i, j, pt});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Region scan.

struct RegionRow {
  GridPoint grid;
  RegionClassification result;
  std::string error;  // non-empty when the point failed
};

struct RegionScanOptions {
  GridSpec grid;
  ClassifyOptions classify;
  unsigned workers = 1;
  std::string checkpoint;  // completed rows, resumable
};

namespace detail {

inline std::string region_checkpoint_header(const RegionScanOptions& opts) {
  return "nlbox-region-checkpoint 1 step=" + hex_double(opts.grid.step) +
         " mode=" + to_string(opts.classify.lp.mode);
}

inline std::string encode_row(std::size_t index, const RegionRow& r) {
  const RegionClassification& c = r.result;
  std::ostringstream out;
  out << "row " << index << ' ' << hex_double(c.c1) << ' ' << hex_double(c.c2) << ' '
      << hex_double(c.d2) << ' ' << c.best_pair << ' ' << static_cast<int>(c.label) << ' '
      << (r.error.empty() ? "-" : "E");
  if (c.c2_certificate)
    out << ' ' << hex_double(c.c2_certificate->lower) << ' ' << hex_double(c.c2_certificate->upper)
        << ' ' << c.c2_certificate->certified;
  return out.str();
}

inline bool decode_row(const std::string& line, std::size_t& index, RegionRow& r) {
  std::istringstream in(line);
  std::string tag, c1, c2, d2, err;
  int label = 0;
  if (!(in >> tag >> index >> c1 >> c2 >> d2 >> r.result.best_pair >> label >> err) ||
      tag != "row" || label < 0 || label > 3)
    return false;
  if (err != "-") return false;  // failed points are recomputed
  r.result.c1 = std::strtod(c1.c_str(), nullptr);
  r.result.c2 = std::strtod(c2.c_str(), nullptr);
  r.result.d2 = std::strtod(d2.c_str(), nullptr);
  r.result.label = static_cast<Region>(label);
  std::string lo, hi;
  int certified = 0;
  if (in >> lo >> hi >> certified) {
    CertifiedBounds b;
    b.lower = std::strtod(lo.c_str(), nullptr);
    b.upper = std::strtod(hi.c_str(), nullptr);
    b.certified = certified != 0;
    r.result.c2_certificate = b;
  }
  return true;
}

}  // namespace detail

inline std::vector<RegionRow> run_region_scan(const RegionScanOptions& opts,
                                              std::ostream* progress = nullptr) {
  const std::vector<GridPoint> points = grid_points(opts.grid);
  std::vector<RegionRow> rows(points.size());
  std::vector<bool> done(points.size(), false);

  std::ofstream checkpoint;
  if (!opts.checkpoint.empty()) {
    const std::string header = detail::region_checkpoint_header(opts);
    std::size_t resumed = 0;
    {
      std::ifstream in(opts.checkpoint);
      std::string line;
      if (in && std::getline(in, line)) {
        if (line != header)
          throw InvalidInput("checkpoint '" + opts.checkpoint + "' belongs to a different scan");
        while (std::getline(in, line)) {
          std::size_t index = 0;
          RegionRow r;
          if (!detail::decode_row(line, index, r) || index >= points.size()) continue;
          r.grid = points[index];
          r.result.xi = points[index].point.xi;
          r.result.gamma = points[index].point.gamma;
          r.result.margin_distill = r.result.d2 - r.result.c1;
          r.result.margin_cost = r.result.c2 - r.result.c1;
          rows[index] = std::move(r);
          done[index] = true;
          ++resumed;
        }
      }
    }
    checkpoint.open(opts.checkpoint, resumed ? std::ios::app : std::ios::trunc);
    if (!checkpoint) throw InvalidInput("cannot write checkpoint '" + opts.checkpoint + "'");
    if (!resumed) checkpoint << header << "\n" << std::flush;
  }

  ClassifyOptions per_point = opts.classify;
  per_point.search.workers = 1;
  per_point.search.progress = nullptr;
  per_point.search.checkpoint.clear();

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::size_t completed = 0;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= points.size()) return;
      if (done[k]) continue;
      RegionRow row;
      row.grid = points[k];
      try {
        row.result = classify_point(points[k].point, per_point);
      } catch (const std::exception& e) {
        row.result.xi = points[k].point.xi;
        row.result.gamma = points[k].point.gamma;
        row.result.label = Region::Ambiguous;
        row.error = e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      if (checkpoint.is_open()) checkpoint << detail::encode_row(k, row) << "\n" << std::flush;
      ++completed;
      if (progress)
        *progress << "{\"event\":\"point\",\"index\":" << k << ",\"xi\":" << detail::fmt(row.result.xi)
                  << ",\"gamma\":" << detail::fmt(row.result.gamma) << ",\"label\":\""
                  << to_string(row.result.label) << "\",\"completed\":" << completed << "}\n"
                  << std::flush;
      rows[k] = std::move(row);
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

/// Columns: xi, gamma, c1, c2, d2, label, best_wiring_id, margin_distill,
/// margin_cost, c2_cert_lower, c2_cert_upper, error.
inline void write_region_csv(std::ostream& out, const std::vector<RegionRow>& rows) {
  out << "xi,gamma,c1,c2,d2,label,best_wiring_id,margin_distill,margin_cost,c2_cert_lower,"
         "c2_cert_upper,error\n";
  for (const RegionRow& r : rows) {
    const RegionClassification& c = r.result;
    out << detail::fmt(c.xi, 10) << ',' << detail::fmt(c.gamma, 10) << ',' << detail::fmt(c.c1)
        << ',' << detail::fmt(c.c2) << ',' << detail::fmt(c.d2) << ',' << to_string(c.label) << ','
        << c.best_pair << ',' << detail::fmt(c.margin_distill, 6) << ','
        << detail::fmt(c.margin_cost, 6) << ',';
    if (c.c2_certificate)
      out << detail::fmt(c.c2_certificate->lower, 17) << ','
          << detail::fmt(c.c2_certificate->upper, 17);
    else
      out << ',';
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << err << '\n';
  }
}

struct RegionCounts {
  std::size_t region_i = 0, region_ii = 0, region_iii = 0, ambiguous = 0, failed = 0;
  std::size_t total() const { return region_i + region_ii + region_iii + ambiguous; }
};

inline RegionCounts count_regions(const std::vector<RegionRow>& rows) {
  RegionCounts c;
  for (const RegionRow& r : rows) {
    if (!r.error.empty()) ++c.failed;
    switch (r.result.label) {
      case Region::I: ++c.region_i; break;
      case Region::II: ++c.region_ii; break;
      case Region::III: ++c.region_iii; break;
      case Region::Ambiguous: ++c.ambiguous; break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Contours of c2 over the triangulated grid.

struct ContourSegment {
  double level;
  double xi1, gamma1, xi2, gamma2;
};

inline std::vector<ContourSegment> c2_contours(const std::vector<RegionRow>& rows,
                                               const std::vector<double>& levels) {
  std::map<std::pair<std::size_t, std::size_t>, const RegionRow*> at;
  for (const RegionRow& r : rows)
    if (r.error.empty()) at[{r.grid.i, r.grid.j}] = &r;
  auto vertex = [&](std::size_t i, std::size_t j) -> const RegionRow* {
    auto it = at.find({i, j});
    return it == at.end() ? nullptr : it->second;
  };
  std::vector<ContourSegment> out;
  auto triangle = [&](const RegionRow* a, const RegionRow* b, const RegionRow* c) {
    if (!a || !b || !c) return;
    const RegionRow* v[3] = {a, b, c};
    for (double level : levels) {
      std::vector<std::pair<double, double>> hits;
      for (int e = 0; e < 3; ++e) {
        const RegionRow* p = v[e];
        const RegionRow* q = v[(e + 1) % 3];
        const double fp = p->result.c2 - level, fq = q->result.c2 - level;
        if ((fp < 0.0) == (fq < 0.0)) continue;
        const double t = fp / (fp - fq);
        hits.emplace_back(p->result.xi + t * (q->result.xi - p->result.xi),
                          p->result.gamma + t * (q->result.gamma - p->result.gamma));
      }
      if (hits.size() == 2)
        out.push_back({level, hits[0].first, hits[0].second, hits[1].first, hits[1].second});
    }
  };
  for (const auto& [key, row] : at) {
    const auto [i, j] = key;
    triangle(row, vertex(i + 1, j), vertex(i, j + 1));
    triangle(vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1));
  }
  return out;
}

inline void write_contours_csv(std::ostream& out, const std::vector<ContourSegment>& segs) {
  out << "level,xi1,gamma1,xi2,gamma2\n";
  for (const ContourSegment& s : segs)
    out << detail::fmt(s.level, 6) << ',' << detail::fmt(s.xi1, 12) << ','
        << detail::fmt(s.gamma1, 12) << ',' << detail::fmt(s.xi2, 12) << ','
        << detail::fmt(s.gamma2, 12) << '\n';
}

// ---------------------------------------------------------------------------
// SVG heatmap. Legend: I #d73027, II #fdae61, III #4575b4, AMBIGUOUS hatched
// grey. Axes: xi to the right, gamma upwards.

inline void write_region_svg(std::ostream& out, const std::vector<RegionRow>& rows, double step,
                             const std::vector<ContourSegment>& contours = {}) {
  const double size = 500.0, margin = 60.0;
  const double cell = step * size;
  auto px = [&](double xi) { return margin + xi * size; };
  auto py = [&](double gamma) { return margin + (1.0 - gamma) * size; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(size + 2 * margin + 140)
      << "\" height=\"" << detail::fmt(size + 2 * margin) << "\">\n";
  out << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
         "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#dddddd\"/>"
         "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#555555\" stroke-width=\"2\"/>"
         "</pattern></defs>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto fill = [](Region r) -> std::string {
    switch (r) {
      case Region::I: return "#d73027";
      case Region::II: return "#fdae61";
      case Region::III: return "#4575b4";
      case Region::Ambiguous: return "url(#hatch)";
    }
    return "black";
  };
  for (const RegionRow& r : rows) {
    const double x = px(r.result.xi) - cell / 2, y = py(r.result.gamma) - cell / 2;
    out << "<rect x=\"" << detail::fmt(x, 8) << "\" y=\"" << detail::fmt(y, 8) << "\" width=\""
        << detail::fmt(cell, 8) << "\" height=\"" << detail::fmt(cell, 8) << "\" fill=\""
        << fill(r.result.label) << "\"/>\n";
  }
  for (const ContourSegment& s : contours)
    out << "<line x1=\"" << detail::fmt(px(s.xi1), 8) << "\" y1=\"" << detail::fmt(py(s.gamma1), 8)
        << "\" x2=\"" << detail::fmt(px(s.xi2), 8) << "\" y2=\"" << detail::fmt(py(s.gamma2), 8)
        << "\" stroke=\"black\" stroke-width=\"0.7\"/>\n";
  // Axes and legend.
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << px(0.5) << "\" y=\"" << py(0) + 40 << "\" font-size=\"16\">xi</text>\n";
  out << "<text x=\"" << px(0) - 45 << "\" y=\"" << py(0.5) << "\" font-size=\"16\">gamma</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t * 0.25;
    out << "<text x=\"" << px(v) - 8 << "\" y=\"" << py(0) + 18 << "\" font-size=\"11\">"
        << detail::fmt(v, 3) << "</text>\n";
    out << "<text x=\"" << px(0) - 32 << "\" y=\"" << py(v) + 4 << "\" font-size=\"11\">"
        << detail::fmt(v, 3) << "</text>\n";
  }
  const Region legend[] = {Region::I, Region::II, Region::III, Region::Ambiguous};
  for (int k = 0; k < 4; ++k) {
    const double y = margin + 20 + 28 * k;
    out << "<rect x=\"" << px(1) + 30 << "\" y=\"" << y << "\" width=\"18\" height=\"18\" fill=\""
        << fill(legend[k]) << "\"/>\n";
    out << "<text x=\"" << px(1) + 56 << "\" y=\"" << y + 14 << "\" font-size=\"13\">"
        << to_string(legend[k]) << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Activation.

inline double activation_prediction(double xi, double xi_prime) {
  return xi + xi_prime * (1.0 - xi) / 8.0;
}

/// Cost of BS applied to P_ISO(xi) x P_NLC(xi').
inline double bs_activation_cost(double xi, double xi_prime) {
  const PartyWiring bs = named_wiring(NamedWiring::BS);
  return closed_form_cost(apply_wiring(bs, bs, iso_box(xi), nlc_box(xi_prime)));
}

struct ActivationCell {
  double xi = 0.0;
  double xi_prime = 0.0;
  double measured = 0.0;
  double predicted = 0.0;
  double deviation = 0.0;
  bool activated = false;  // measured > max(C(P1), C(P2))
  std::optional<double> searched;  // D(P1 x P2) by exhaustive search
};

struct StrongerActivationRecord {
  double xi = 0.0;
  double xi_prime = 0.0;
  int copies = 1;
  double bound = 0.0;          // 1 - (1 - xi')^N >= D(P2^xN)
  double c_prime = 0.0;
  double d_p1_two_copy = 0.0;  // D(P1 x P1) by search
  bool strict = false;         // c_prime > max(d_p1_two_copy, bound)
};

struct ActivationOptions {
  std::vector<double> xi{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> xi_prime{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> copies{1, 2, 3, 4, 5};
  double tolerance = kLpTol;
  bool search_pairs = false;  // also run D(P1 x P2) per cell
  SearchOptions search;
};

struct ActivationReport {
  std::vector<ActivationCell> cells;
  std::vector<StrongerActivationRecord> stronger;
  std::optional<ActivationCell> first_failure;
  bool ok() const { return !first_failure; }
};

inline ActivationReport run_activation(const ActivationOptions& opts) {
  for (double v : opts.xi)
    if (!(v > 0.0 && v < 1.0)) throw InvalidInput("activation xi values must lie in (0, 1)");
  for (double v : opts.xi_prime)
    if (!(v > 0.0 && v < 1.0)) throw InvalidInput("activation xi' values must lie in (0, 1)");
  for (int n : opts.copies)
    if (n < 1) throw InvalidInput("copy counts must be positive");
  ActivationReport report;
  std::map<double, double> d_iso;  // D(P_ISO(xi)^x2)
  for (double xi : opts.xi) {
    SearchOptions so = opts.search;
    so.checkpoint.clear();
    d_iso[xi] = distillable_2copy(iso_box(xi), iso_box(xi), so).d_value;
  }
  for (double xi : opts.xi)
    for (double xp : opts.xi_prime) {
      ActivationCell c;
      c.xi = xi;
      c.xi_prime = xp;
      c.measured = bs_activation_cost(xi, xp);
      c.predicted = activation_prediction(xi, xp);
      c.deviation = std::abs(c.measured - c.predicted);
      c.activated = c.measured > std::max(xi, xp);
      if (opts.search_pairs) {
        SearchOptions so = opts.search;
        so.checkpoint.clear();
        c.searched = distillable_2copy(iso_box(xi), nlc_box(xp), so).d_value;
      }
      if (c.deviation > opts.tolerance && !report.first_failure) report.first_failure = c;
      report.cells.push_back(c);
      for (int n : opts.copies) {
        const double bound = 1.0 - std::pow(1.0 - xp, n);
        if (!(bound > 0.0 && bound <= xi && xi < 1.0)) continue;
        StrongerActivationRecord r;
        r.xi = xi;
        r.xi_prime = xp;
        r.copies = n;
        r.bound = bound;
        r.c_prime = c.measured;
        r.d_p1_two_copy = d_iso[xi];
        r.strict = r.c_prime > std::max(r.d_p1_two_copy, r.bound);
        report.stronger.push_back(r);
      }
    }
  return report;
}

inline void write_activation_csv(std::ostream& out, const ActivationReport& r) {
  out << "xi,xi_prime,measured,predicted,deviation,activated,searched\n";
  for (const ActivationCell& c : r.cells)
    out << detail::fmt(c.xi, 10) << ',' << detail::fmt(c.xi_prime, 10) << ','
        << detail::fmt(c.measured) << ',' << detail::fmt(c.predicted) << ','
        << detail::fmt(c.deviation, 6) << ',' << (c.activated ? 1 : 0) << ','
        << (c.searched ? detail::fmt(*c.searched) : std::string()) << '\n';
}

inline void write_stronger_activation_csv(std::ostream& out, const ActivationReport& r) {
  out << "xi,xi_prime,N,bound,c_prime,d_p1_two_copy,strict\n";
  for (const StrongerActivationRecord& s : r.stronger)
    out << detail::fmt(s.xi, 10) << ',' << detail::fmt(s.xi_prime, 10) << ',' << s.copies << ','
        << detail::fmt(s.bound) << ',' << detail::fmt(s.c_prime) << ','
        << detail::fmt(s.d_p1_two_copy) << ',' << (s.strict ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Audits.

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyPointReport {
  FamilyPoint point;
  double c1 = 0.0, c1_lp = 0.0, c2 = 0.0, d2 = 0.0;
  std::vector<VerifyCheck> checks;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.pass; });
  }
};

struct VerifyOptions {
  Epr2Options lp;
  SearchOptions search;
  double chain_tol = kClassificationTol;
};

inline VerifyPointReport verify_point(FamilyPoint pt, const VerifyOptions& opts = {}) {
  VerifyPointReport rep;
  rep.point = pt;
  const BehaviorBox box = family_box(pt);
  rep.c1 = closed_form_cost(box);
  rep.c1_lp = epr2_cost(box, opts.lp).cost;
  rep.c2 = epr2_cost_two_copies(box, box, opts.lp).cost;
  rep.d2 = distillable_2copy(box, box, opts.search).d_value;
  auto check = [&](std::string name, bool pass, std::string detail) {
    rep.checks.push_back({std::move(name), pass, std::move(detail)});
  };
  const double tol = opts.chain_tol;
  check("family_cost", std::abs(rep.c1 - pt.xi) <= 1e-12 && std::abs(rep.c1_lp - pt.xi) <= kLpTol,
        "closed form " + detail::fmt(rep.c1) + ", LP " + detail::fmt(rep.c1_lp) + ", xi " +
            detail::fmt(pt.xi));
  check("inequality_chain", rep.c1 - tol <= rep.d2 && rep.d2 <= rep.c2 + tol,
        detail::fmt(rep.c1) + " <= " + detail::fmt(rep.d2) + " <= " + detail::fmt(rep.c2));
  const double product = 1.0 - (1.0 - rep.c1) * (1.0 - rep.c1);
  check("product_bound", rep.c2 <= product + tol,
        detail::fmt(rep.c2) + " <= " + detail::fmt(product));
  const double twirled = closed_form_cost(twirl(box));
  check("twirl_cost", std::abs(twirled - rep.c1) <= 1e-12,
        "twirled " + detail::fmt(twirled) + ", original " + detail::fmt(rep.c1));
  check("lp_closed_form", std::abs(rep.c1_lp - rep.c1) <= 1e-8,
        "difference " + detail::fmt(std::abs(rep.c1_lp - rep.c1), 3));
  return rep;
}

inline void write_verify_csv(std::ostream& out, const std::vector<VerifyPointReport>& reps) {
  out << "xi,gamma,check,pass,detail\n";
  for (const VerifyPointReport& r : reps)
    for (const VerifyCheck& c : r.checks)
      out << detail::fmt(r.point.xi, 10) << ',' << detail::fmt(r.point.gamma, 10) << ',' << c.name
          << ',' << (c.pass ? 1 : 0) << ',' << c.detail << '\n';
}

}  // namespace nlbox
