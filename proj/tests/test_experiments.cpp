#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlbox/experiments.hpp"

using namespace nlbox;

namespace {

RegionScanOptions small_scan() {
  RegionScanOptions o;
  o.grid.step = 0.1;
  o.grid.filter = GridFilter{0.0, 0.2, 0.6, 1.0};
  return o;
}

std::string csv_of(const std::vector<RegionRow>& rows) {
  std::ostringstream out;
  write_region_csv(out, rows);
  return out.str();
}

RegionRow synthetic_row(std::size_t i, std::size_t j, std::size_t n, Region label) {
  RegionRow r;
  r.grid = {i, j, {double(i) / n, double(j) / n}};
  r.result.xi = r.grid.point.xi;
  r.result.gamma = r.grid.point.gamma;
  r.result.c1 = r.result.xi;
  r.result.c2 = r.result.xi;
  r.result.d2 = r.result.xi;
  r.result.label = label;
  return r;
}

}  // namespace

TEST(Grid, LatticeCounts) {
  EXPECT_EQ(grid_points({0.05, {}}).size(), 231u);
  EXPECT_EQ(grid_points({0.02, {}}).size(), 1326u);
  EXPECT_EQ(grid_points({0.25, {}}).size(), 15u);
  EXPECT_EQ(grid_points({0.03, {}}).size(), 34u * 35u / 2u);
  for (const GridPoint& g : grid_points({0.02, {}})) {
    EXPECT_LE(g.point.xi + g.point.gamma, 1.0 + 1e-12);
    EXPECT_NO_THROW(family_box(g.point));
  }
}

TEST(Grid, OrderAndCoordinates) {
  const auto pts = grid_points({0.05, {}});
  EXPECT_EQ(pts.front().point.xi, 0.0);
  EXPECT_EQ(pts.back().point.xi, 1.0);
  EXPECT_EQ(pts[1].point.gamma, 1.0 / 20.0);
  EXPECT_EQ(pts[20].point.gamma, 1.0);
  for (std::size_t k = 1; k < pts.size(); ++k)
    EXPECT_TRUE(pts[k - 1].i < pts[k].i || (pts[k - 1].i == pts[k].i && pts[k - 1].j < pts[k].j));
}

TEST(Grid, StepValidatedAndFilterApplied) {
  EXPECT_THROW(grid_points({0.0, {}}), InvalidInput);
  EXPECT_THROW(grid_points({0.3, {}}), InvalidInput);
  EXPECT_THROW(grid_points({-0.1, {}}), InvalidInput);
  const auto f = grid_points(small_scan().grid);
  EXPECT_EQ(f.size(), 5u + 4u + 3u);  // xi 0, 0.1, 0.2 with gamma in [0.6, 1 - xi]
  for (const GridPoint& g : f) {
    EXPECT_LE(g.point.xi, 0.2 + 1e-12);
    EXPECT_GE(g.point.gamma, 0.6 - 1e-12);
  }
}

TEST(RegionScan, DeterministicCsvAcrossRunsAndWorkers) {
  RegionScanOptions o = small_scan();
  const std::string a = csv_of(run_region_scan(o));
  o.workers = 3;
  const std::string b = csv_of(run_region_scan(o));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "xi,gamma,c1,c2,d2,label,best_wiring_id,margin_distill,margin_cost,c2_cert_lower,"
            "c2_cert_upper,error");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 13);
}

TEST(RegionScan, RowsSatisfyChainAndCorrelatedEdgeIsDistillable) {
  const std::vector<RegionRow> rows = run_region_scan(small_scan());
  for (const RegionRow& r : rows) {
    ASSERT_TRUE(r.error.empty());
    const RegionClassification& c = r.result;
    EXPECT_LE(c.c1, c.d2 + 1e-7);
    EXPECT_LE(c.d2, c.c2 + 1e-7);
    EXPECT_LE(c.c2, 1 - (1 - c.c1) * (1 - c.c1) + 1e-7);
    if (c.xi > 0 && std::abs(c.xi + c.gamma - 1.0) < 1e-12 && c.xi <= 0.2) {
      EXPECT_EQ(c.label, Region::I) << c.xi;
    }
    if (c.xi == 0.0) {
      EXPECT_EQ(c.label, Region::III);
    }
  }
}

TEST(RegionScan, CheckpointResumes) {
  const auto path = std::filesystem::temp_directory_path() / "nlbox_region_ckpt.txt";
  std::filesystem::remove(path);
  RegionScanOptions o = small_scan();
  o.checkpoint = path.string();
  const std::string first = csv_of(run_region_scan(o));
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
  }
  ASSERT_EQ(lines.size(), 13u);
  {
    std::ofstream out(path, std::ios::trunc);
    for (std::size_t i = 0; i < 7; ++i) out << lines[i] << "\n";
  }
  std::ostringstream progress;
  const std::string second = csv_of(run_region_scan(o, &progress));
  EXPECT_EQ(first, second);
  const std::string events = progress.str();
  EXPECT_EQ(std::count(events.begin(), events.end(), '\n'), 6);
  o.grid.step = 0.05;
  EXPECT_THROW(run_region_scan(o), InvalidInput);
  std::filesystem::remove(path);
}

TEST(RegionScan, SolverFailuresRecordedPerRow) {
  RegionScanOptions o = small_scan();
  o.grid.filter = GridFilter{0.1, 0.2, 0.6, 0.7};
  o.classify.lp.iteration_cap = 2;
  const std::vector<RegionRow> rows = run_region_scan(o);
  ASSERT_EQ(rows.size(), 4u);
  for (const RegionRow& r : rows) {
    EXPECT_FALSE(r.error.empty());
    EXPECT_EQ(r.result.label, Region::Ambiguous);
  }
  EXPECT_EQ(count_regions(rows).failed, 4u);
}

TEST(RegionOutputs, SvgHasHatchedAmbiguousCells) {
  std::vector<RegionRow> rows{synthetic_row(0, 0, 4, Region::III), synthetic_row(1, 0, 4, Region::II),
                              synthetic_row(0, 1, 4, Region::I),
                              synthetic_row(1, 1, 4, Region::Ambiguous)};
  std::ostringstream svg;
  write_region_svg(svg, rows, 0.25);
  const std::string s = svg.str();
  EXPECT_NE(s.find("<pattern id=\"hatch\""), std::string::npos);
  EXPECT_NE(s.find("fill=\"url(#hatch)\""), std::string::npos);
  EXPECT_EQ(s.find("<script"), std::string::npos);
  EXPECT_NE(s.find("AMBIGUOUS"), std::string::npos);
  EXPECT_EQ(s.rfind("</svg>\n"), s.size() - 7);
}

TEST(RegionOutputs, ContoursFollowLevelSets) {
  std::vector<RegionRow> rows;
  const std::size_t n = 10;
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; i + j <= n; ++j) rows.push_back(synthetic_row(i, j, n, Region::III));
  const auto segs = c2_contours(rows, {0.25, 0.55});
  ASSERT_FALSE(segs.empty());
  for (const ContourSegment& s : segs) {
    EXPECT_NEAR(s.xi1, s.level, 1e-12);
    EXPECT_NEAR(s.xi2, s.level, 1e-12);
  }
  std::ostringstream out;
  write_contours_csv(out, segs);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "level,xi1,gamma1,xi2,gamma2");
}

TEST(Activation, FormulaHoldsOnDefaultGrid) {
  const ActivationReport r = run_activation({});
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.cells.size(), 81u);
  for (const ActivationCell& c : r.cells) {
    EXPECT_LE(c.deviation, 1e-9);
    if (c.xi_prime <= c.xi) {
      EXPECT_GT(c.measured, c.xi);
    }
  }
  for (const ActivationCell& c : r.cells)
    if (std::abs(c.xi - 0.4) < 1e-12 && std::abs(c.xi_prime - 0.8) < 1e-12) {
      EXPECT_NEAR(c.predicted, 0.46, 1e-15);
      EXPECT_NEAR(c.measured, 0.46, 1e-12);
    }
}

TEST(Activation, StrongerRecords) {
  const ActivationReport r = run_activation({});
  bool found = false;
  for (const StrongerActivationRecord& s : r.stronger) {
    EXPECT_LE(s.bound, s.xi);
    EXPECT_TRUE(s.strict) << s.xi << " " << s.xi_prime << " " << s.copies;
    EXPECT_FALSE(std::abs(s.xi - 0.4) < 1e-12 && std::abs(s.xi_prime - 0.8) < 1e-12 && s.copies == 1);
    if (std::abs(s.xi - 0.9) < 1e-12 && std::abs(s.xi_prime - 0.1) < 1e-12 && s.copies == 2) {
      found = true;
      EXPECT_NEAR(s.bound, 0.19, 1e-12);
      EXPECT_NEAR(s.c_prime, 0.90125, 1e-12);
      EXPECT_NEAR(s.d_p1_two_copy, 0.9, 1e-9);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Activation, RangesValidated) {
  ActivationOptions o;
  o.xi = {0.0};
  EXPECT_THROW(run_activation(o), InvalidInput);
  o.xi = {0.5};
  o.xi_prime = {1.0};
  EXPECT_THROW(run_activation(o), InvalidInput);
  o.xi_prime = {0.5};
  o.copies = {0};
  EXPECT_THROW(run_activation(o), InvalidInput);
}

TEST(Activation, FailureNamesOffendingCell) {
  ActivationOptions o;
  o.xi = {0.3};
  o.xi_prime = {0.2, 0.4};
  o.tolerance = -1.0;  // every cell fails
  const ActivationReport r = run_activation(o);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.first_failure->xi, 0.3);
  EXPECT_EQ(r.first_failure->xi_prime, 0.2);
}

TEST(Verify, DefaultPointsPass) {
  for (const FamilyPoint pt : {FamilyPoint{0.5, 0.3}, FamilyPoint{0.0, 0.0}, FamilyPoint{1.0, 0.0}}) {
    const VerifyPointReport r = verify_point(pt);
    EXPECT_TRUE(r.pass()) << pt.xi << "," << pt.gamma;
    EXPECT_EQ(r.checks.size(), 5u);
  }
  const VerifyPointReport f = verify_point({0.0, 0.0});
  EXPECT_EQ(f.c1, 0.0);
  EXPECT_NEAR(f.c2, 0.0, 1e-9);
  EXPECT_NEAR(f.d2, 0.0, 1e-12);
  const VerifyPointReport pr = verify_point({1.0, 0.0});
  EXPECT_NEAR(pr.c1, 1.0, 1e-12);
  EXPECT_NEAR(pr.c2, 1.0, 1e-9);
  EXPECT_NEAR(pr.d2, 1.0, 1e-12);
}
