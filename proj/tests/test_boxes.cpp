#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "nlbox/box.hpp"
#include "nlbox/box_io.hpp"
#include "nlbox/sampling.hpp"

using namespace nlbox;

namespace {

// Reference CHSH values computed straight from the sign formula.
std::array<double, 8> naive_chsh(const BehaviorBox& p) {
  std::array<double, 8> out{};
  for (unsigned k = 0; k < 8; ++k) {
    const unsigned al = (k >> 2) & 1, be = (k >> 1) & 1, ga = k & 1;
    double s = 0.0;
    for (unsigned x = 0; x < 2; ++x)
      for (unsigned y = 0; y < 2; ++y)
        for (unsigned a = 0; a < 2; ++a)
          for (unsigned b = 0; b < 2; ++b) {
            const unsigned parity = a ^ b ^ (x & y) ^ (al & x) ^ (be & y) ^ ga;
            s += (parity ? -1.0 : 1.0) * p(x, y, a, b);
          }
    out[k] = s;
  }
  return out;
}

std::array<double, 8> sorted_chsh(const BehaviorBox& p) {
  std::array<double, 8> v = chsh_values(p).values;
  std::sort(v.begin(), v.end());
  return v;
}

template <class Rng>
Relabeling random_binary_relabeling(Rng& rng) {
  std::uniform_int_distribution<unsigned> bit(0, 1);
  Relabeling r = Relabeling::identity(kBinaryShape);
  for (PartyRelabeling* p : {&r.alice, &r.bob}) {
    if (bit(rng)) std::swap(p->input_perm[0], p->input_perm[1]);
    for (auto& o : p->output_perm)
      if (bit(rng)) std::swap(o[0], o[1]);
  }
  if (bit(rng)) std::swap(r.alice, r.bob);
  return r;
}

}  // namespace

TEST(NamedBoxes, EntriesMatchDefinitions) {
  EXPECT_DOUBLE_EQ(make_named_box("PR")(1, 1, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(make_named_box("PC")(1, 1, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(make_named_box("PF")(1, 1, 0, 0), 0.125);
  EXPECT_DOUBLE_EQ(make_named_box("WHITE_NOISE")(0, 1, 1, 0), 0.25);
  const BehaviorBox t = make_named_box("TSIRELSON_ISO");
  EXPECT_NEAR(closed_form_cost(t), std::sqrt(2.0) - 1.0, 1e-15);
  for (unsigned x = 0; x < 2; ++x)
    for (unsigned y = 0; y < 2; ++y)
      for (unsigned a = 0; a < 2; ++a)
        for (unsigned b = 0; b < 2; ++b) {
          const int s = ((a ^ b ^ (x & y)) & 1) ? -1 : 1;
          EXPECT_DOUBLE_EQ(pr_box()(x, y, a, b), 0.25 * (1 + s));
          EXPECT_DOUBLE_EQ(facet_box()(x, y, a, b), 0.125 * (2 + s));
        }
}

TEST(NamedBoxes, UnknownNameRejected) {
  EXPECT_THROW(make_named_box("PR2"), InvalidInput);
  EXPECT_THROW(parse_named_box(""), InvalidInput);
}

TEST(FamilyBox, DegenerateMixturesAndDirectEvaluation) {
  EXPECT_EQ(family_box({1.0, 0.0}), pr_box());
  EXPECT_EQ(family_box({0.0, 1.0}), correlated_box());
  EXPECT_NEAR(family_box({0.5, 0.3})(1, 1, 0, 0), 0.175, 1e-15);
  EXPECT_EQ(iso_box(0.3), family_box({0.3, 0.0}));
  EXPECT_EQ(nlc_box(0.3), family_box({0.3, 0.7}));
}

TEST(FamilyBox, InvalidPointsRejected) {
  EXPECT_THROW(family_box({-0.1, 0.2}), InvalidInput);
  EXPECT_THROW(family_box({0.5, -1e-9}), InvalidInput);
  EXPECT_THROW(family_box({0.8, 0.3}), InvalidInput);
  EXPECT_THROW(family_box({NAN, 0.0}), InvalidInput);
}

TEST(FamilyBox, GridValidAndCostEqualsXi) {
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; i + j <= 20; ++j) {
      const FamilyPoint pt{i / 20.0, j / 20.0};
      const BehaviorBox p = family_box(pt);
      const BoxDiagnostics d = validate(p);
      EXPECT_LE(d.normalization_residual, 1e-12);
      EXPECT_LE(d.no_signaling_residual, 1e-12);
      EXPECT_GE(d.min_entry, 0.0);
      EXPECT_NEAR(closed_form_cost(p), pt.xi, 1e-12);
      EXPECT_NEAR(chsh_values(p).s_max(), 2.0 + 2.0 * pt.xi, 1e-12);
    }
}

TEST(TensorProduct, Examples) {
  const BehaviorBox pp = tensor_product(pr_box(), pr_box());
  EXPECT_EQ(pp.shape().x_card, 4u);
  EXPECT_EQ(pp.shape().y_card, 4u);
  EXPECT_EQ(pp.shape().a_card, 4u);
  EXPECT_EQ(pp.shape().b_card, 4u);
  // x = (1,1) -> 3, a = (0,0) -> 0.
  EXPECT_DOUBLE_EQ(pp(3, 3, 0, 0), 0.0);
  const BehaviorBox cc = tensor_product(correlated_box(), correlated_box());
  for (unsigned x = 0; x < 4; ++x)
    for (unsigned y = 0; y < 4; ++y)
      for (unsigned a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(cc(x, y, a, a), 0.25);
}

TEST(TensorProduct, HighOrderDigitIsFirstCopy) {
  std::mt19937_64 rng(7);
  const BehaviorBox p1 = random_binary_ns_box(rng), p2 = random_binary_ns_box(rng);
  const BehaviorBox t = tensor_product(p1, p2);
  for (unsigned x1 = 0; x1 < 2; ++x1)
    for (unsigned x2 = 0; x2 < 2; ++x2)
      for (unsigned y1 = 0; y1 < 2; ++y1)
        for (unsigned y2 = 0; y2 < 2; ++y2)
          for (unsigned a1 = 0; a1 < 2; ++a1)
            for (unsigned a2 = 0; a2 < 2; ++a2)
              for (unsigned b1 = 0; b1 < 2; ++b1)
                for (unsigned b2 = 0; b2 < 2; ++b2)
                  EXPECT_EQ(t(2 * x1 + x2, 2 * y1 + y2, 2 * a1 + a2, 2 * b1 + b2),
                            p1(x1, y1, a1, b1) * p2(x2, y2, a2, b2));
}

TEST(TensorProduct, ProductsOfRandomBoxesValidate) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const BehaviorBox p = tensor_product(random_binary_ns_box(rng), random_binary_ns_box(rng));
    EXPECT_TRUE(validate(p).accepted()) << "trial " << t;
  }
}

TEST(Validate, ReportsResiduals) {
  const BoxDiagnostics pr = validate(pr_box());
  EXPECT_EQ(pr.normalization_residual, 0.0);
  EXPECT_EQ(pr.no_signaling_residual, 0.0);

  const BehaviorBox prb = pr_box();
  std::vector<double> v(prb.values().begin(), prb.values().end());
  for (unsigned a = 0; a < 2; ++a)
    for (unsigned b = 0; b < 2; ++b) v[kBinaryShape.index(0, 0, a, b)] *= 1.1;
  EXPECT_NEAR(validate(BehaviorBox(kBinaryShape, v)).normalization_residual, 0.1, 1e-15);

  // Alice's marginal P(a=0|x=0) is 0.5 at y=0 and 0.7 at y=1.
  BehaviorBox s = white_noise_box();
  s.at(0, 1, 0, 0) = 0.35;
  s.at(0, 1, 0, 1) = 0.35;
  s.at(0, 1, 1, 0) = 0.15;
  s.at(0, 1, 1, 1) = 0.15;
  const double oracle = std::abs((s(0, 0, 0, 0) + s(0, 0, 0, 1)) - (s(0, 1, 0, 0) + s(0, 1, 0, 1)));
  EXPECT_NEAR(oracle, 0.2, 1e-15);
  EXPECT_NEAR(validate(s).no_signaling_residual, oracle, 1e-15);
  EXPECT_THROW(require_valid(s), InvalidInput);
}

TEST(Validate, ConstructionClampsTinyNegatives) {
  const BehaviorBox prb = pr_box();
  std::vector<double> v(prb.values().begin(), prb.values().end());
  const std::size_t zero = kBinaryShape.index(0, 0, 0, 1);
  v[zero] = -1e-16;
  v[kBinaryShape.index(0, 0, 0, 0)] += 1e-16;
  const BehaviorBox b = BehaviorBox::checked(kBinaryShape, v);
  EXPECT_EQ(b[zero], 0.0);
  v[zero] = -1e-6;
  EXPECT_THROW(BehaviorBox::checked(kBinaryShape, v), InvalidInput);
  EXPECT_THROW(BehaviorBox(kBinaryShape, std::vector<double>(15, 0.25)), InvalidInput);
}

TEST(Chsh, ExamplesAndNaiveOracle) {
  EXPECT_DOUBLE_EQ(chsh_values(pr_box()).s_max(), 4.0);
  EXPECT_DOUBLE_EQ(chsh_values(correlated_box()).s_max(), 2.0);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    const auto ref = naive_chsh(p);
    const ChshSummary s = chsh_values(p);
    for (int k = 0; k < 8; ++k) EXPECT_NEAR(s.values[k], ref[k], 1e-14);
    const auto best = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
    EXPECT_EQ(s.best, static_cast<std::size_t>(best));
  }
  EXPECT_THROW(chsh_values(tensor_product(pr_box(), pr_box())), InvalidInput);
}

TEST(ClosedFormCost, Examples) {
  EXPECT_DOUBLE_EQ(closed_form_cost(pr_box()), 1.0);
  EXPECT_NEAR(closed_form_cost(family_box({0.5, 0.3})), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(closed_form_cost(correlated_box()), 0.0);
  EXPECT_DOUBLE_EQ(closed_form_cost(white_noise_box()), 0.0);
}

TEST(Relabel, Examples) {
  EXPECT_EQ(relabel(pr_box(), Relabeling::identity(kBinaryShape)), pr_box());

  Relabeling flip = Relabeling::identity(kBinaryShape);
  for (auto& o : flip.alice.output_perm) std::swap(o[0], o[1]);
  for (auto& o : flip.bob.output_perm) std::swap(o[0], o[1]);
  const BehaviorBox f = relabel(pr_box(), flip);
  for (unsigned x = 0; x < 2; ++x)
    for (unsigned y = 0; y < 2; ++y)
      for (unsigned a = 0; a < 2; ++a)
        for (unsigned b = 0; b < 2; ++b) EXPECT_EQ(f(x, y, a, b), pr_box()(x, y, a ^ 1, b ^ 1));
  EXPECT_DOUBLE_EQ(chsh_values(f).s_max(), 4.0);

  Relabeling xflip = Relabeling::identity(kBinaryShape);
  std::swap(xflip.alice.input_perm[0], xflip.alice.input_perm[1]);
  const BehaviorBox g = relabel(pr_box(), xflip);
  EXPECT_NE(chsh_values(g).best, 0u);
  EXPECT_DOUBLE_EQ(chsh_values(g).values[0], 0.0);
  EXPECT_EQ(sorted_chsh(g), sorted_chsh(pr_box()));
}

TEST(Relabel, RejectsNonBijections) {
  Relabeling r = Relabeling::identity(kBinaryShape);
  r.alice.input_perm = {0, 0};
  EXPECT_THROW(relabel(pr_box(), r), InvalidInput);
  r = Relabeling::identity(kBinaryShape);
  r.bob.output_perm.pop_back();
  EXPECT_THROW(relabel(pr_box(), r), InvalidInput);
}

TEST(RelabelProperty, ChshMultisetAndCostInvariant) {
  std::mt19937_64 rng(2024);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    const BehaviorBox q = relabel(p, random_binary_relabeling(rng));
    const auto a = sorted_chsh(p), b = sorted_chsh(q);
    for (int k = 0; k < 8; ++k)
      if (std::abs(a[k] - b[k]) > 1e-12) ++violations;
    if (std::abs(closed_form_cost(p) - closed_form_cost(q)) > 1e-12) ++violations;
    if (!validate(q).accepted()) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Twirl, Examples) {
  const BehaviorBox tp = twirl(pr_box());
  const BehaviorBox ti = twirl(iso_box(0.37));
  const BehaviorBox tc = twirl(correlated_box());
  for (std::size_t e = 0; e < 16; ++e) {
    EXPECT_NEAR(tp[e], pr_box()[e], 1e-15);
    EXPECT_NEAR(ti[e], iso_box(0.37)[e], 1e-15);
    EXPECT_NEAR(tc[e], facet_box()[e], 1e-15);
  }
}

TEST(Twirl, EachElementPreservesPrParity) {
  for (unsigned t = 0; t < 8; ++t) EXPECT_EQ(twirl_element(pr_box(), t >> 2, (t >> 1) & 1, t & 1), pr_box());
}

TEST(TwirlProperty, IsotropicWithSameCost) {
  std::mt19937_64 rng(99);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const BehaviorBox p = random_binary_ns_box(rng);
    const BehaviorBox q = twirl(p);
    const auto e = correlators(q);
    if (std::abs(std::abs(e[0]) - std::abs(e[1])) > 1e-12 ||
        std::abs(std::abs(e[0]) - std::abs(e[2])) > 1e-12 ||
        std::abs(std::abs(e[0]) - std::abs(e[3])) > 1e-12)
      ++violations;
    if (std::abs(chsh_values(q).values[0] - chsh_values(p).s_max()) > 1e-12) ++violations;
    if (closed_form_cost(p) > 0 && std::abs(closed_form_cost(q) - closed_form_cost(p)) > 1e-12)
      ++violations;
    if (!validate(q).accepted()) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Mixture, RejectsBadWeights) {
  const std::vector<BehaviorBox> boxes{pr_box(), correlated_box()};
  EXPECT_THROW(mixture(boxes, std::vector<double>{0.5}), InvalidInput);
  EXPECT_THROW(mixture(boxes, std::vector<double>{0.7, 0.7}), InvalidInput);
  EXPECT_EQ(mixture(boxes, std::vector<double>{1.0, 0.0}), pr_box());
}

TEST(Sampling, VerticesAreValidAndNoSignaling) {
  const auto v = binary_ns_vertices();
  ASSERT_EQ(v.size(), 24u);
  int nonlocal = 0;
  for (const BehaviorBox& b : v) {
    EXPECT_TRUE(validate(b).accepted());
    if (closed_form_cost(b) > 0.5) ++nonlocal;
  }
  EXPECT_EQ(nonlocal, 8);
}

TEST(BoxIo, RoundTripIsBitExact) {
  const auto path = std::filesystem::temp_directory_path() / "nlbox_roundtrip.json";
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const BehaviorBox b = t == 0 ? family_box({0.5, 0.3}) : random_binary_ns_box(rng);
    write_box_file(path.string(), b);
    const BehaviorBox r = read_box_file(path.string());
    ASSERT_EQ(r.shape(), b.shape());
    for (std::size_t e = 0; e < b.values().size(); ++e) EXPECT_EQ(r[e], b[e]);
  }
  const BehaviorBox big = tensor_product(iso_box(0.3), nlc_box(0.6));
  EXPECT_EQ(box_from_json(box_to_json(big)), big);
  std::filesystem::remove(path);
}

TEST(BoxIo, MalformedInputRejected) {
  EXPECT_THROW(box_from_json("{}"), InvalidInput);
  EXPECT_THROW(box_from_json("not json"), InvalidInput);
  EXPECT_THROW(read_box_file("/nonexistent/box.json"), InvalidInput);
}
