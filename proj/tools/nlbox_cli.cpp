// nlbox: command-line front end for box construction, EPR2 costs, wirings,
// two-copy distillation search and the region/activation experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlbox/box.hpp"
#include "nlbox/box_io.hpp"
#include "nlbox/distill.hpp"
#include "nlbox/epr2.hpp"
#include "nlbox/experiments.hpp"
#include "nlbox/wiring.hpp"

namespace fs = std::filesystem;
using namespace nlbox;

namespace {

struct Globals {
  double step = 0.02;
  std::string mode = "cutting-plane";
  double tol = kLpTol;
  std::size_t iteration_cap = Epr2Options{}.iteration_cap;
  bool certify = false;
  unsigned workers = 1;
  std::string checkpoint;
  std::string out_dir = ".";
  bool progress = false;
};

Epr2Options lp_options(const Globals& g) {
  Epr2Options o;
  o.mode = parse_lp_mode(g.mode);
  o.tolerance = g.tol;
  o.iteration_cap = g.iteration_cap;
  o.certify = g.certify;
  return o;
}

SearchOptions search_options(const Globals& g) {
  SearchOptions s;
  s.workers = g.workers;
  s.checkpoint = g.checkpoint;
  if (g.progress) s.progress = &std::cerr;
  return s;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw InvalidInput("cannot write '" + p.string() + "'");
  return out;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void print_status(const SolverStatus& s) {
  std::cout << "mode " << to_string(s.mode) << "\n"
            << "iterations " << s.iterations << "\n"
            << "separation_rounds " << s.separation_rounds << "\n"
            << "columns " << s.columns_generated << "\n"
            << "primal_residual " << fmt(s.primal_residual) << "\n"
            << "dual_residual " << fmt(s.dual_residual) << "\n"
            << "duality_gap " << fmt(s.duality_gap) << "\n"
            << "seconds " << fmt(s.seconds) << "\n";
  if (s.certificate)
    std::cout << "certified " << (s.certificate->certified ? 1 : 0) << "\n"
              << "certified_lower " << format_double(s.certificate->lower) << "\n"
              << "certified_upper " << format_double(s.certificate->upper) << "\n";
}

void print_search(const SearchResult& r) {
  std::cout << fmt(r.d_value) << "\n";
  std::cout << "chsh " << fmt(r.s_value) << "\n";
  std::cout << "ties " << r.tie_count << "\n";
  if (!r.argmax_ids.empty()) {
    std::cout << "best_wiring_id " << r.argmax_ids.front() << "\n";
    std::cout << "best_wiring " << serialize_wiring_pair(wiring_pair_from_id(r.argmax_ids.front()))
              << "\n";
  }
  std::cout << "pairs " << r.evaluated_pairs << "\n"
            << "seconds " << fmt(r.elapsed.count()) << "\n";
}

PartyWiring wiring_arg(const std::string& text) {
  if (text.find(',') != std::string::npos) return parse_wiring(text);
  return named_wiring(text);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw InvalidInput("bad number '" + item + "'");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal box costs, wirings and two-copy distillation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file supplying defaults for the global flags");

  Globals g;
  app.add_option("--step", g.step, "Region grid step")->capture_default_str();
  app.add_option("--mode", g.mode, "LP mode: dense-dual or cutting-plane")->capture_default_str();
  app.add_option("--tol", g.tol, "LP residual tolerance")->capture_default_str();
  app.add_option("--iteration-cap", g.iteration_cap, "Simplex pivot limit per LP")->capture_default_str();
  app.add_flag("--certify", g.certify, "Certify LP optima in exact rationals");
  app.add_option("--workers", g.workers, "Worker threads")->capture_default_str();
  app.add_option("--checkpoint", g.checkpoint, "Resumable checkpoint file");
  app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();
  app.add_flag("--progress", g.progress, "JSON progress lines on stderr");

  // box
  auto* box_cmd = app.add_subcommand("box", "Construct, validate and write a box");
  std::string box_name, box_in, box_out;
  std::vector<double> box_family;
  double box_iso = -1.0, box_nlc = -1.0;
  auto* name_opt = box_cmd->add_option("--name", box_name, "PR, PC, PF, WHITE_NOISE, TSIRELSON_ISO");
  auto* fam_opt = box_cmd->add_option("--family", box_family, "xi gamma")->expected(2);
  auto* iso_opt = box_cmd->add_option("--iso", box_iso, "P_ISO(xi)");
  auto* nlc_opt = box_cmd->add_option("--nlc", box_nlc, "P_NLC(xi)");
  auto* in_opt = box_cmd->add_option("--in", box_in, "Read and validate a box file");
  name_opt->excludes(fam_opt, iso_opt, nlc_opt, in_opt);
  fam_opt->excludes(iso_opt, nlc_opt, in_opt);
  iso_opt->excludes(nlc_opt, in_opt);
  nlc_opt->excludes(in_opt);
  box_cmd->add_option("--out", box_out, "Output file (stdout when omitted)");

  // cost
  auto* cost_cmd = app.add_subcommand("cost", "EPR2 cost of one box");
  std::string cost_file;
  bool cost_details = false;
  cost_cmd->add_option("box", cost_file, "Box file")->required();
  cost_cmd->add_flag("--details", cost_details, "Print solver diagnostics and the mixture");

  // cost2
  auto* cost2_cmd = app.add_subcommand("cost2", "EPR2 cost of a two-box tensor product");
  std::string cost2_a, cost2_b;
  bool cost2_details = false;
  cost2_cmd->add_option("box1", cost2_a, "First box file")->required();
  cost2_cmd->add_option("box2", cost2_b, "Second box file (defaults to the first)");
  cost2_cmd->add_flag("--details", cost2_details, "Print solver diagnostics");

  // wire
  auto* wire_cmd = app.add_subcommand("wire", "Apply a wiring to two boxes");
  std::string wire_alice = "FWW", wire_bob, wire_pair, wire_a, wire_b, wire_out;
  std::uint64_t wire_id = 0;
  wire_cmd->add_option("box1", wire_a, "First box file")->required();
  wire_cmd->add_option("box2", wire_b, "Second box file")->required();
  auto* wa = wire_cmd->add_option("--wiring", wire_alice, "Named wiring or record for Alice");
  wire_cmd->add_option("--bob-wiring", wire_bob, "Bob's wiring (defaults to Alice's)");
  auto* wp = wire_cmd->add_option("--pair", wire_pair, "Pair record A=...;B=...");
  auto* wi = wire_cmd->add_option("--pair-id", wire_id, "Catalog pair id");
  wp->excludes(wa, wi);
  wi->excludes(wa);
  wire_cmd->add_option("--out", wire_out, "Output file (stdout when omitted)");

  // distill2
  auto* d2_cmd = app.add_subcommand("distill2", "Exhaustive two-copy wiring search");
  std::string d2_a, d2_b;
  bool d2_symmetric = false;
  d2_cmd->add_option("box1", d2_a, "First box file")->required();
  d2_cmd->add_option("box2", d2_b, "Second box file (defaults to the first)");
  d2_cmd->add_flag("--symmetric", d2_symmetric, "Search both copy orders");

  // region
  auto* region_cmd = app.add_subcommand("region", "Classify the P(xi, gamma) section");
  std::vector<double> region_filter;
  bool region_certify_boundary = false;
  region_cmd->add_option("--filter", region_filter, "xi_min xi_max gamma_min gamma_max")->expected(4);
  region_cmd->add_flag("--certify-boundary", region_certify_boundary,
                       "Certify c2 at close or ambiguous points");

  // activation
  auto* act_cmd = app.add_subcommand("activation", "BS activation table on P_ISO x P_NLC");
  std::string act_xi = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string act_xp = act_xi, act_n = "1,2,3,4,5";
  bool act_search = false;
  act_cmd->add_option("--xi", act_xi, "Comma-separated xi values")->capture_default_str();
  act_cmd->add_option("--xi-prime", act_xp, "Comma-separated xi' values")->capture_default_str();
  act_cmd->add_option("--copies", act_n, "Comma-separated copy counts N")->capture_default_str();
  act_cmd->add_flag("--search", act_search, "Also search D(P1 x P2) per cell");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Audit the cost identities at family points");
  std::vector<std::string> verify_points;
  verify_cmd->add_option("--point", verify_points, "xi,gamma (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*box_cmd) {
      BehaviorBox box;
      if (!box_name.empty()) box = make_named_box(box_name);
      else if (!box_family.empty()) box = family_box({box_family[0], box_family[1]});
      else if (*iso_opt) box = iso_box(box_iso);
      else if (*nlc_opt) box = nlc_box(box_nlc);
      else if (!box_in.empty()) {
        const BehaviorBox raw = read_box_file(box_in);
        box = BehaviorBox::checked(raw.shape(), {raw.values().begin(), raw.values().end()});
      }
      else throw InvalidInput("box needs one of --name, --family, --iso, --nlc, --in");
      require_valid(box);
      if (box_out.empty()) std::cout << box_to_json(box) << "\n";
      else write_box_file(box_out, box);
      const BoxDiagnostics d = validate(box);
      std::cerr << "normalization_residual " << fmt(d.normalization_residual)
                << " no_signaling_residual " << fmt(d.no_signaling_residual) << " min_entry "
                << fmt(d.min_entry) << "\n";
      return 0;
    }
    if (*cost_cmd) {
      const BehaviorBox box = read_box_file(cost_file);
      const Epr2Result r = epr2_cost(box, lp_options(g));
      std::cout << fmt(r.cost) << "\n";
      if (cost_details) {
        if (box.shape().is_binary()) std::cout << "closed_form " << fmt(closed_form_cost(box)) << "\n";
        std::cout << "local_weight " << fmt(r.local_weight) << "\n";
        print_status(r.status);
        for (const MixtureWeight& m : r.mixture)
          std::cout << "strategy " << m.strategy << " " << format_double(m.weight) << "\n";
      }
      return 0;
    }
    if (*cost2_cmd) {
      const BehaviorBox p1 = read_box_file(cost2_a);
      const BehaviorBox p2 = cost2_b.empty() ? p1 : read_box_file(cost2_b);
      const Epr2Result r = epr2_cost_two_copies(p1, p2, lp_options(g));
      std::cout << fmt(r.cost) << "\n";
      if (cost2_details) print_status(r.status);
      return 0;
    }
    if (*wire_cmd) {
      const BehaviorBox p1 = read_box_file(wire_a);
      const BehaviorBox p2 = read_box_file(wire_b);
      WiringPair w;
      if (*wi) w = wiring_pair_from_id(wire_id);
      else if (*wp) w = parse_wiring_pair(wire_pair);
      else w = {wiring_arg(wire_alice), wiring_arg(wire_bob.empty() ? wire_alice : wire_bob)};
      const BehaviorBox out = apply_wiring(w.alice, w.bob, p1, p2);
      if (wire_out.empty()) std::cout << box_to_json(out) << "\n";
      else write_box_file(wire_out, out);
      std::cerr << "wiring " << serialize_wiring_pair(w) << " closed_form "
                << fmt(closed_form_cost(out)) << "\n";
      return 0;
    }
    if (*d2_cmd) {
      const BehaviorBox p1 = read_box_file(d2_a);
      const BehaviorBox p2 = d2_b.empty() ? p1 : read_box_file(d2_b);
      require_binary(p1);
      require_binary(p2);
      require_valid(p1);
      require_valid(p2);
      const SearchOptions so = search_options(g);
      print_search(d2_symmetric ? distillable_2copy_symmetric(p1, p2, so)
                                : distillable_2copy(p1, p2, so));
      return 0;
    }
    if (*region_cmd) {
      RegionScanOptions o;
      o.grid.step = g.step;
      if (!region_filter.empty())
        o.grid.filter = GridFilter{region_filter[0], region_filter[1], region_filter[2],
                                   region_filter[3]};
      o.classify.lp = lp_options(g);
      o.classify.lp.certify = false;
      o.classify.certify_boundary = g.certify || region_certify_boundary;
      o.workers = g.workers;
      o.checkpoint = g.checkpoint;
      const std::vector<RegionRow> rows = run_region_scan(o, g.progress ? &std::cerr : nullptr);
      {
        std::ofstream csv = open_out(out_path(g, "region.csv"));
        write_region_csv(csv, rows);
      }
      std::vector<double> levels;
      for (int k = 1; k < 20; ++k) levels.push_back(0.05 * k);
      const std::vector<ContourSegment> contours = c2_contours(rows, levels);
      {
        std::ofstream c = open_out(out_path(g, "c2_contours.csv"));
        write_contours_csv(c, contours);
      }
      {
        std::ofstream svg = open_out(out_path(g, "region.svg"));
        write_region_svg(svg, rows, g.step, contours);
      }
      const RegionCounts c = count_regions(rows);
      std::cout << "points " << rows.size() << "\nregion_I " << c.region_i << "\nregion_II "
                << c.region_ii << "\nregion_III " << c.region_iii << "\nambiguous " << c.ambiguous
                << "\nfailed " << c.failed << "\n";
      return c.failed ? 3 : 0;
    }
    if (*act_cmd) {
      ActivationOptions o;
      o.xi = parse_list(act_xi);
      o.xi_prime = parse_list(act_xp);
      o.copies.clear();
      for (double n : parse_list(act_n)) o.copies.push_back(static_cast<int>(n));
      o.tolerance = g.tol;
      o.search_pairs = act_search;
      o.search = search_options(g);
      o.search.checkpoint.clear();
      const ActivationReport r = run_activation(o);
      {
        std::ofstream csv = open_out(out_path(g, "activation.csv"));
        write_activation_csv(csv, r);
      }
      {
        std::ofstream csv = open_out(out_path(g, "stronger_activation.csv"));
        write_stronger_activation_csv(csv, r);
      }
      std::cout << "cells " << r.cells.size() << "\nstronger_records " << r.stronger.size() << "\n";
      if (!r.ok()) {
        const ActivationCell& f = *r.first_failure;
        std::cerr << "activation mismatch at xi=" << fmt(f.xi) << " xi'=" << fmt(f.xi_prime)
                  << ": measured " << fmt(f.measured) << ", expected " << fmt(f.predicted) << "\n";
        return 2;
      }
      return 0;
    }
    if (*verify_cmd) {
      std::vector<FamilyPoint> points;
      for (const std::string& p : verify_points) {
        const std::vector<double> v = parse_list(p);
        if (v.size() != 2) throw InvalidInput("--point expects xi,gamma");
        points.push_back({v[0], v[1]});
      }
      if (points.empty()) points = {{0.5, 0.3}, {0.0, 0.0}, {1.0, 0.0}};
      VerifyOptions o;
      o.lp = lp_options(g);
      o.lp.certify = false;
      o.search = search_options(g);
      o.search.checkpoint.clear();
      std::vector<VerifyPointReport> reports;
      bool ok = true;
      for (const FamilyPoint& pt : points) {
        reports.push_back(verify_point(pt, o));
        for (const VerifyCheck& c : reports.back().checks) {
          std::cout << (c.pass ? "PASS " : "FAIL ") << fmt(pt.xi) << "," << fmt(pt.gamma) << " "
                    << c.name << ": " << c.detail << "\n";
          ok = ok && c.pass;
        }
      }
      std::ofstream csv = open_out(out_path(g, "verify.csv"));
      write_verify_csv(csv, reports);
      return ok ? 0 : 2;
    }
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << " (cost in [" << fmt(e.cost_lower()) << ", "
              << fmt(e.cost_upper()) << "])\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
