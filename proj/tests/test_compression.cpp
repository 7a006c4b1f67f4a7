#include <gtest/gtest.h>

#include <cmath>

#include "kakeya/compression.hpp"
#include "kakeya/classifier.hpp"
#include "kakeya/rng.hpp"

using namespace kakeya;

namespace {

// |det(W - A(t))| / |t|^(m+1) stays bounded while |det| / |t|^m -> 0.
void expect_vanishing_order(const MatrixPoly& A, const Eigen::Matrix2d& W, int m) {
  auto f = [&](double t) { return std::abs((W - A.at(t)).determinant()); };
  double t1 = 1e-2, t2 = 1e-3;
  EXPECT_LT(f(t2) / std::pow(t2, m), 0.2 * f(t1) / std::pow(t1, m) + 1e-12);
  EXPECT_LT(f(t2) / std::pow(t2, m + 1), 10.0 * (f(t1) / std::pow(t1, m + 1)) + 1e-6);
}

}  // namespace

TEST(Compression, StraightPolynomialHasOrderOne) {
  MatrixPoly A = MatrixPoly::from_terms({minus_identity()});
  CompressionResult r = compression_order(A);
  EXPECT_FALSE(r.infinite);
  EXPECT_EQ(r.m, 1);
  // W = 0 already gives det(-t I_-) = t^2.
  EXPECT_NEAR((r.witness - A.at(0.0)).determinant(), 0.0, 1e-15);
}

TEST(Compression, WorstPolynomialVanishesIdentically) {
  MatrixPoly A = MatrixPoly::from_terms({sym2(0, 1, 0), sym2(0, 0, 1)});
  CompressionResult r = compression_order(A);
  EXPECT_TRUE(r.infinite);
  for (double t : {-1.0, 0.3, 2.0}) EXPECT_NEAR((r.witness - A.at(t)).determinant(), 0.0, 1e-12);
}

TEST(Compression, OpenConditionGivesOrderTwo) {
  CounterRng rng(9, "m2");
  int seen = 0;
  for (std::uint64_t i = 0; seen < 20; ++i) {
    Eigen::Matrix2d B = sym2(rng.uniform(i, 0, -1, 1), rng.uniform(i, 1, -1, 1), rng.uniform(i, 2, -1, 1));
    Eigen::Matrix2d C = sym2(rng.uniform(i, 3, -1, 1), rng.uniform(i, 4, -1, 1), rng.uniform(i, 5, -1, 1));
    if (!open_condition(B, C).holds) continue;
    ++seen;
    MatrixPoly A = MatrixPoly::from_terms({minus_identity(), B, C});
    CompressionResult r = compression_order(A);
    ASSERT_FALSE(r.infinite);
    EXPECT_EQ(r.m, 2);
    expect_vanishing_order(A, r.witness, 2);
  }
}

TEST(Compression, WitnessIsRankOne) {
  CompressionResult r = compression_order(default_model_poly());
  EXPECT_NEAR(r.witness.determinant(), 0.0, 1e-12);
  EXPECT_NEAR(r.witness(0, 1) + r.witness(1, 0), r.z(2), 1e-12);
}

TEST(Compression, CapStopsTheSearch) {
  MatrixPoly A = MatrixPoly::from_terms({sym2(0, 1, 0), sym2(0, 0, 1)});
  CompressionResult r = compression_order(A, 2);
  EXPECT_TRUE(r.capped);
  EXPECT_FALSE(r.infinite);
}

TEST(ContactOrder, RejectsShortRows) {
  EXPECT_THROW(contact_order(worst_phase(), 0.0, {0.3, 0.2}, 3), DomainError);
}

TEST(ContactOrder, RowsAreTaylorCoefficients) {
  // Model phases: D(t) = A(t0 + t) - A(t0) exactly; entries j!-scaled derivatives.
  PhaseFunction ph = phase_by_label("model");
  MatrixPoly A = default_model_poly();
  double t0 = 0.2;
  ContactOrderReport rep = contact_order(ph, t0, {0.3, 0.2}, 5);
  auto D = [&](double t) { return Eigen::Matrix2d(A.at(t0 + t) - A.at(t0)); };
  // First derivative of D11 at 0 by central differences.
  double h = 1e-5;
  double d11 = (D(h)(0, 0) - D(-h)(0, 0)) / (2 * h);
  EXPECT_NEAR(rep.matrix(1, 0), d11, 1e-8);
  double det2nd = (D(h).determinant() - 2 * D(0).determinant() + D(-h).determinant()) / (h * h);
  EXPECT_NEAR(rep.matrix(0, 1), det2nd, 1e-4);
  EXPECT_NEAR(rep.matrix(0, 0), 0.0, 1e-14);
}

TEST(ContactOrder, WorstPhaseIsRankDeficient) {
  for (int k = 4; k <= 8; ++k) EXPECT_LT(contact_order(worst_phase(), 0.0, {0.3, 0.2}, k).rank, 4);
}

TEST(WitnessSet, ContainsTheCurvesNearTheOrigin) {
  MatrixPoly A = default_model_poly();
  CompressionResult r = compression_order(A);
  WitnessSet w = compression_witness_set(A, r.witness, 1.0 / 64, r.m, r.infinite);
  EXPECT_NEAR(w.t_max, std::pow(1.0 / 64, 1.0 / 3), 1e-15);
  EXPECT_GT(w.cells.size(), 0u);
  EXPECT_GT(w.min_curve_density, 0.5);
}
