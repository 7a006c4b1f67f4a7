#include <gtest/gtest.h>

#include <map>
#include <set>

#include "kakeya/discrete.hpp"

using namespace kakeya;

TEST(Voxel, PackRoundTripAndSetAlgebra) {
  auto k = pack_cell(-3, 17, 5);
  Cell c = unpack_cell(k);
  EXPECT_EQ(c.i, -3);
  EXPECT_EQ(c.j, 17);
  EXPECT_EQ(c.k, 5);
  VoxelSet a = VoxelSet::from_keys(0.5, {pack_cell(0, 0, 0), pack_cell(1, 0, 0)});
  VoxelSet b = VoxelSet::from_keys(0.5, {pack_cell(1, 0, 0), pack_cell(2, 0, 0)});
  EXPECT_EQ(set_union(a, b).size(), 3u);
  EXPECT_EQ(set_intersection(a, b).size(), 1u);
  EXPECT_EQ(dilate(VoxelSet::from_keys(0.5, {pack_cell(0, 0, 0)})).size(), 27u);
  EXPECT_DOUBLE_EQ(union_measure({a, b}), 3 * 0.125);
}

TEST(Voxel, ExponentFitRecoversPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (int k = 3; k <= 8; ++k) {
    double d = std::ldexp(1.0, -k);
    pts.push_back({d, 5.0 * std::pow(d, 1.25)});
  }
  ExponentFit f = exponent_fit(pts);
  EXPECT_NEAR(f.slope, 1.25, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW(exponent_fit({{0.5, 1.0}, {0.25, 1.0}}), DomainError);
}

TEST(Shading, VerticalLineCenterline) {
  VoxelSet y = shade_path([](double) { return Vec2d{0.01, 0.01}; }, {{0.0, 1.0}}, 0.125, ShadeMode::Centerline);
  EXPECT_EQ(y.size(), 9u);  // t-cells 0..8 (t = 1 opens the ninth)
  EXPECT_NEAR(lambda_density(y), 9 * 0.125, 1e-15);
}

TEST(Sampling, DirectionsAreDeltaSeparated) {
  SampleOptions o;
  o.fraction = 0.5;
  o.v_rule = VRule::Random;
  CurveSet L = direction_separated_sample(parabolic_phase(), 0.125, o);
  auto xi = L.directions();
  double gap = 1e9;
  for (std::size_t i = 0; i < xi.size(); ++i)
    for (std::size_t j = i + 1; j < xi.size(); ++j) gap = std::min(gap, std::hypot(xi[i][0] - xi[j][0], xi[i][1] - xi[j][1]));
  EXPECT_GE(gap, 0.125 * (1 - 1e-12));
  EXPECT_THROW(direction_separated_sample(parabolic_phase(), 0.001), DomainError);
}

TEST(Incidence, MultiplicitiesMatchBruteForce) {
  CurveSet L = direction_separated_sample(parabolic_phase(), 0.25, {});
  auto Y = shade_all(L);
  IncidenceIndex idx = build_incidence(Y);
  std::map<std::uint64_t, std::size_t> brute;
  for (const auto& y : Y)
    for (auto k : y.keys) ++brute[k];
  std::size_t mx = 0;
  for (auto [k, m] : brute) {
    EXPECT_EQ(idx.multiplicity(k), m);
    mx = std::max(mx, m);
  }
  EXPECT_EQ(idx.max_multiplicity(), mx);
  EXPECT_EQ(idx.multiplicity(pack_cell(900, 900, 900)), 0u);
}

TEST(BallCondition, DetectsClusters) {
  std::vector<Vec3d> spread, clump;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) spread.push_back({-1 + 0.25 * i, -1 + 0.25 * j, 0});
  for (int i = 0; i < 200; ++i) clump.push_back({1e-4 * i, 0, 0});
  EXPECT_TRUE(ball_condition_check(spread, 0.25).holds);
  EXPECT_FALSE(ball_condition_check(clump, 0.25).holds);
}

TEST(Bush, ExtractedFromCurvesThroughAPoint) {
  std::vector<VoxelSet> Y;
  std::vector<Vec2d> xi;
  PhaseFunction ph = parabolic_phase();
  for (int i = 0; i < 30; ++i) {
    double a = 2 * 3.14159265358979 * i / 30;
    Vec2d x{0.7 * std::cos(a), 0.7 * std::sin(a)};
    xi.push_back(x);
    PhaseCurve c{x, {0.0, 0.0}};
    Y.push_back(shade_path([&](double t) { return phase_curve_point(ph, c, t); }, {{-0.5, 0.5}}, 1.0 / 32));
  }
  IncidenceIndex idx = build_incidence(Y);
  Bush b = extract_bush(idx, 1.0 / 32);
  EXPECT_EQ(b.members.size(), 30u);
  EXPECT_LT(std::abs(b.center[2]), 3.0 / 32);
  DichotomyResult d = multiplicity_dichotomy(Y, xi, 1.0 / 32);
  EXPECT_TRUE(d.case_I || d.case_II);
  if (!d.high.empty()) {
    Hairbrush h = extract_hairbrush(Y, xi, idx, d.high.front(), d.sigma);
    for (std::size_t m = 0; m < h.members.size(); ++m) {
      auto other = static_cast<std::size_t>(h.members[m]);
      double gap = std::hypot(xi[other][0] - xi[static_cast<std::size_t>(h.stem)][0],
                              xi[other][1] - xi[static_cast<std::size_t>(h.stem)][1]);
      EXPECT_GE(gap, d.sigma * (1 - 1e-12));
      EXPECT_LT(gap, 2 * d.sigma);
      EXPECT_TRUE(Y[other].contains(h.certificate[m]));
    }
  }
}

TEST(Bush, SingleCurveHasNoBush) {
  CurveSet L = direction_separated_sample(parabolic_phase(), 1.0, {});
  ASSERT_EQ(L.size(), 4u);
  std::vector<VoxelSet> Y{shade_path(L.path(0), {{0.0, 1.0}}, 0.25)};
  EXPECT_THROW(extract_bush(build_incidence(Y), 0.25), DomainError);
}

TEST(Refinement, RegularShadingIsUnchanged) {
  VoxelSet y = shade_path([](double t) { return Vec2d{0.3 * t, -0.2 * t}; }, {{0.0, 1.0}}, 1.0 / 32);
  RegularRefinement r = regular_refinement(y);
  EXPECT_EQ(r.retained_fraction, 1.0);
  EXPECT_GE(regularity_margin(r.cells, 4.0), 1.0);
}

TEST(BroadNarrow, PointMassIsDegenerate) {
  std::vector<double> th(100, 0.1);
  EXPECT_THROW(broad_narrow(th, 1.0 / 16), NarrowDegenerate);
  EXPECT_THROW(broad_narrow({0.1}, 1.0 / 16), DomainError);
}

TEST(BroadNarrow, UniformSplitsImmediately) {
  std::vector<double> th;
  for (int i = 0; i < 500; ++i) th.push_back(-1 + 2 * (i + 0.5) / 500);
  BroadNarrowResult b = broad_narrow(th, 1.0 / 64);
  EXPECT_EQ(b.level, 0);
  EXPECT_EQ(b.children, 6);
  EXPECT_DOUBLE_EQ(b.guarantee, std::pow(100.0, -b.n_levels));
}

TEST(Prisms, RhoRangeEnforced) {
  CurveFamily F = family_by_label("hairbrush:model");
  EXPECT_THROW(prism_decomposition(F, {0.6, 0.3, 0.0}, 0.5, 1.0 / 64, 0.125), DomainError);
  PrismDecomposition P = prism_decomposition(F, {0.6, 0.3, 0.0}, 1.0 / 64, 1.0 / 64, 0.125);
  EXPECT_NEAR(P.d, std::sqrt(0.125), 1e-15);
  EXPECT_TRUE(P.in_P0(F(0.6, 0.3, 0.0, 0.7), 0.7));
}
