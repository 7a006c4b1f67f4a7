#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "kakeya/classifier.hpp"
#include "kakeya/rng.hpp"

using namespace kakeya;

TEST(Classifier, StraightHairbrushIsPlaneyFlat1) {
  PointReport r = classify_point(straight_hairbrush(), 0.6, 0.3, 0.1, 0.8);
  EXPECT_EQ(r.coniness, Coniness::Planey);
  EXPECT_EQ(r.flatness, Flatness::Flat1);
  EXPECT_NEAR(r.spread.omega_dot[0], 0.6 / (0.1 - 0.8), 1e-13);
  EXPECT_NEAR(r.spread.omega_dot[1], 0.3 / (0.1 - 0.8), 1e-13);
}

TEST(Classifier, Sl2ChartIsPlaney) {
  // Directions (c, d) of lines through a point satisfy x1 d - x2 c = 1, a line.
  RegionSummary s = summarize(classify_grid(sl2_chart(), 5, 3));
  EXPECT_EQ(s.coniness_label(), "planey");
}

TEST(Classifier, QuadraticHairbrushIsConeyAndTwisty) {
  PointReport r = classify_point(quadratic_hairbrush(sym2(0.3, 0.2, -0.1)), 0.5, 0.5, 0.0, 0.6);
  EXPECT_EQ(r.coniness, Coniness::Coney);
  EXPECT_EQ(r.flatness, Flatness::Twisty);
}

TEST(Classifier, SpreadDerivativesAgreeWithFiniteDifferences) {
  CurveFamily F = family_by_label("hairbrush:tan");
  auto dom = F.t_domain(0.5, 0.6, 2.0);
  double t = 0.5 * (dom.back().lo + dom.back().hi);
  SpreadDerivatives s = spread_derivatives(F, 0.5, 0.6, 2.0, t);
  FdSpread f = spread_derivatives_fd(F, 0.5, 0.6, 2.0, t);
  for (int k = 0; k < 2; ++k) {
    auto K = static_cast<std::size_t>(k);
    EXPECT_NEAR(s.omega_dot[K], f.omega_dot[K], 1e-6 * norm2(s.omega_dot));
    EXPECT_NEAR(s.omega_ddot[K], f.omega_ddot[K], 1e-5 * norm2(s.omega_ddot));
  }
}

TEST(Classifier, TangencyMatrixOfWorstHairbrush) {
  Eigen::Matrix3d M = tangency_matrix(worst_hairbrush(), -0.3, 0.6, 0.2, 0.9);
  EXPECT_NEAR(M(0, 0), -0.6, 1e-12);
  EXPECT_NEAR(M(0, 1), -0.3, 1e-12);
  EXPECT_NEAR(M(0, 2), -0.36, 1e-12);
  EXPECT_LT(M.bottomRows(2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Classifier, OpenConditionAgreesWithEigenvalueDefiniteness) {
  CounterRng rng(1, "open");
  Eigen::Matrix2d a;
  a << 0, 1, -1, 0;
  Eigen::Matrix2d Im = minus_identity();
  int agree = 0, total = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    Eigen::Matrix2d B = sym2(rng.uniform(i, 0, -1, 1), rng.uniform(i, 1, -1, 1), rng.uniform(i, 2, -1, 1));
    Eigen::Matrix2d C = sym2(rng.uniform(i, 3, -1, 1), rng.uniform(i, 4, -1, 1), rng.uniform(i, 5, -1, 1));
    OpenCondition oc = open_condition(B, C);
    if (std::abs(oc.margin) < 1e-9) continue;
    Eigen::Matrix2d Q = Im * a * (B * Im * B - C);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (Q + Q.transpose()));
    bool definite = es.eigenvalues()(0) * es.eigenvalues()(1) > 0;
    agree += definite == oc.holds;
    ++total;
  }
  EXPECT_EQ(agree, total);
  EXPECT_GT(total, 400);
}

TEST(Classifier, GammaOracleRejectsCloseTimes) {
  HairbrushParams hp;
  hp.sigma = 0.1;
  EXPECT_THROW(hairbrush_gamma_oracle(parabolic_phase(), hp, {0.6, 0.1}, 0.0, 0.1), DomainError);
}

TEST(Classifier, TransversalityRequiresSeparatedThetas) {
  CurveFamily F = quadratic_hairbrush(sym2(0.05, 0.025, -0.025));
  EXPECT_THROW(transversality_sample(F, {0.7, 0.2}, 0.0, 0.6, {0.0, 0.001, 0.1}, 0.125, 3.0), DomainError);
  TransversalitySample s = transversality_sample(F, {0.7, 0.2}, 0.0, 0.6, {0.0, 0.05, 0.1}, 0.125, 3.0);
  EXPECT_GT(s.ratio, 0.1);
}

TEST(Classifier, GrainProjectionFlattensTheBaseCurve) {
  CurveFamily F = family_by_label("hairbrush:model");
  GrainProjection P{&F, 0.6, 0.3, 0.0};
  for (double t : {0.4, 0.7, 1.0}) {
    Vec2d y = P(F(0.6, 0.3, 0.0, t), t);
    EXPECT_NEAR(y[0], t, 1e-15);
    EXPECT_NEAR(y[1], 0.0, 1e-14);
    Vec2d n = P.gamma_perp(t);
    EXPECT_NEAR(norm2(n), 1.0, 1e-14);
  }
}

TEST(Classifier, BasicConditionsHoldOnTheModelHairbrush) {
  BasicConditionsReport b = basic_conditions_report(family_by_label("hairbrush:model"), 5, 3);
  EXPECT_TRUE(b.ok);
  EXPECT_GT(b.min_gamma, 0.0);
}
