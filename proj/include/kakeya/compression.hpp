#pragma once

// Compression order m(A) of a matrix polynomial, contact-order matrices and
// compression witness sets.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "kakeya/families.hpp"
#include "kakeya/voxel.hpp"

namespace kakeya {

// det(Omega - A(t)) with A symmetric depends on Omega only through
// z = (Omega_11, Omega_22, Omega_12 + Omega_21). Order k >= 1 is linear in z:
//   -[A22]_k z0 - [A11]_k z1 + [A12]_k z2 = -[det A]_k,
// and order 0 asks for real Omega_12, Omega_21, i.e. z2^2 - 4 z0 z1 >= 0.
struct CompressionSystem {
  Eigen::MatrixXd R;  // rows k = 1..K
  Eigen::VectorXd b;
};

inline CompressionSystem compression_system(const MatrixPoly& A, int K) {
  CompressionSystem s;
  s.R.resize(K, 3);
  s.b.resize(K);
  auto dc = A.det_coeffs();
  for (int k = 1; k <= K; ++k) {
    Eigen::Matrix2d a = A.coeff(k);
    s.R.row(k - 1) << -a(1, 1), -a(0, 0), a(0, 1);
    s.b(k - 1) = -(k < static_cast<int>(dc.size()) ? dc[static_cast<std::size_t>(k)] : 0.0);
  }
  return s;
}

struct AffineSolution {
  bool consistent = false;
  Eigen::Vector3d z0 = Eigen::Vector3d::Zero();  // minimum-norm solution
  Eigen::MatrixXd N;                              // nullspace basis, 3 x dim
  double residual = 0.0;
};

inline AffineSolution solve_affine(const CompressionSystem& s, double tol = 1e-9) {
  AffineSolution out;
  if (s.R.rows() == 0) {
    out.consistent = true;
    out.N = Eigen::Matrix3d::Identity();
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-11 * std::max(1.0, smax)) ++rank;
  Eigen::VectorXd utb = svd.matrixU().transpose() * s.b;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  for (int i = 0; i < rank; ++i) z += svd.matrixV().col(i) * (utb(i) / sv(i));
  out.z0 = z;
  out.N = svd.matrixV().rightCols(3 - rank);
  out.residual = (s.R * z - s.b).norm();
  out.consistent = out.residual <= tol * (1.0 + s.b.norm() + s.R.norm());
  return out;
}

inline double discriminant(const Eigen::Vector3d& z) { return z(2) * z(2) - 4.0 * z(0) * z(1); }

// Searches the affine set z0 + N y for a point with z2^2 - 4 z0 z1 >= 0.
inline std::optional<Eigen::Vector3d> quadratic_feasible(const AffineSolution& a, double tol = 1e-10) {
  Eigen::Matrix3d P;
  P << 0, -2, 0, -2, 0, 0, 0, 0, 1;
  const Eigen::Vector3d& z0 = a.z0;
  double q0 = z0.dot(P * z0);
  double scale = 1.0 + z0.squaredNorm();
  if (q0 >= -tol * scale) return z0;
  int dim = static_cast<int>(a.N.cols());
  if (dim == 0) return std::nullopt;
  Eigen::MatrixXd H = a.N.transpose() * P * a.N;
  Eigen::VectorXd g = a.N.transpose() * P * z0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  // q(y) = q0 + 2 g.y + y^T H y.
  auto along = [&](const Eigen::VectorXd& y0, const Eigen::VectorXd& v) -> std::optional<Eigen::Vector3d> {
    Eigen::Vector3d base = z0 + a.N * y0;
    Eigen::Vector3d dir = a.N * v;
    double c = base.dot(P * base), bb = base.dot(P * dir), aa = dir.dot(P * dir);
    // smallest |s| with c + 2 bb s + aa s^2 >= 0
    double best = std::numeric_limits<double>::infinity();
    if (std::abs(aa) < 1e-14) {
      if (std::abs(bb) > 1e-14) best = -c / (2 * bb);
    } else {
      double disc = bb * bb - aa * c;
      if (disc >= 0) {
        double r1 = (-bb - std::sqrt(disc)) / aa, r2 = (-bb + std::sqrt(disc)) / aa;
        best = std::abs(r1) < std::abs(r2) ? r1 : r2;
      }
    }
    if (!std::isfinite(best)) return std::nullopt;
    Eigen::Vector3d z = base + dir * best;
    double q = z.dot(P * z);
    if (q < 0) z = base + dir * (best * (1 + 1e-12) + (best >= 0 ? 1e-12 : -1e-12));
    return z;
  };
  for (int i = dim - 1; i >= 0; --i) {
    double lam = es.eigenvalues()(i);
    Eigen::VectorXd v = es.eigenvectors().col(i);
    if (lam > 1e-12) return along(Eigen::VectorXd::Zero(dim), v);
    if (std::abs(lam) <= 1e-12 && std::abs(g.dot(v)) > 1e-12) return along(Eigen::VectorXd::Zero(dim), v);
  }
  // Negative semidefinite with no unbounded direction: maximize.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    double lam = es.eigenvalues()(i);
    if (lam < -1e-12) y -= es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(g) / lam);
  }
  Eigen::Vector3d z = z0 + a.N * y;
  if (z.dot(P * z) >= -tol * (1.0 + z.squaredNorm())) return z;
  return std::nullopt;
}

// Omega with Omega_11 = z0, Omega_22 = z1, Omega_12 + Omega_21 = z2, det Omega = 0.
inline Eigen::Matrix2d witness_from_z(const Eigen::Vector3d& z) {
  double q = std::max(0.0, discriminant(z));
  double o12 = 0.5 * (z(2) + std::sqrt(q));
  Eigen::Matrix2d W;
  W << z(0), o12, z(2) - o12, z(1);
  return W;
}

// Coefficients of det(Omega - A(t)).
inline std::vector<double> witness_det_coeffs(const MatrixPoly& A, const Eigen::Matrix2d& W) {
  MatrixPoly D;
  D.a.push_back(W);
  for (int k = 1; k <= A.degree(); ++k) D.a.push_back(-A.coeff(k));
  return D.det_coeffs();
}

struct CompressionResult {
  int m = 0;             // compression order (valid when !infinite)
  bool infinite = false;
  bool capped = false;   // search stopped at m_max
  int m_star = 0;        // linear-only order
  bool m_star_infinite = false;
  Eigen::Matrix2d witness = Eigen::Matrix2d::Zero();
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  Eigen::Vector3d lambda = Eigen::Vector3d::Zero();  // (lambda11, lambda22, lambda12)
  std::vector<double> witness_coeffs;
};

inline CompressionResult compression_order(const MatrixPoly& A, int m_max = -1) {
  A.validate();
  int K = 2 * A.degree();
  int cap = (m_max > 0) ? std::min(m_max, K) : K;
  CompressionResult r;
  Eigen::Vector3d last = Eigen::Vector3d::Zero();
  int m = 0;
  for (int k = 1; k <= cap; ++k) {
    auto sol = solve_affine(compression_system(A, k));
    if (!sol.consistent) break;
    auto z = quadratic_feasible(sol);
    if (!z) break;
    last = *z;
    m = k;
  }
  int ms = 0;
  for (int k = 1; k <= K; ++k) {
    if (!solve_affine(compression_system(A, k)).consistent) break;
    ms = k;
  }
  r.m = m;
  r.infinite = (m == K);
  r.capped = (m == cap && cap < K);
  r.m_star = ms;
  r.m_star_infinite = (ms == K);
  r.z = last;
  r.witness = witness_from_z(last);
  r.lambda = {-last(1), -last(0), last(2)};
  r.witness_coeffs = witness_det_coeffs(A, r.witness);
  return r;
}

// Contact-order matrix: rows (det D)^(j), D11^(j), D12^(j), D22^(j), j = 1..k,
// of D(t) = Hess psi(t0 + t, xi0) - Hess psi(t0, xi0).
struct ContactOrderReport {
  Eigen::MatrixXd matrix;  // 4 x k
  Eigen::VectorXd singular_values;
  int rank = 0;
  double first_row_residual = 0.0;  // relative distance of row 0 from span(rows 1..3)
  bool first_row_in_span = false;
  bool full_rank = false;  // contact order >= k
};

inline ContactOrderReport contact_order(const PhaseFunction& phase, double t0, const Vec2d& xi0, int k,
                                        double rel_tol = 1e-9) {
  if (k < 4) throw DomainError("contact order: k must be at least 4");
  if (k + 2 > kMaxOrder) throw JetError("jet: derivative order beyond jet capacity");
  auto H = phase.hessian_series(t0, xi0, k);
  std::vector<Eigen::Matrix2d> D(H.begin(), H.end());
  D[0].setZero();
  ContactOrderReport rep;
  rep.matrix.resize(4, k);
  for (int j = 1; j <= k; ++j) {
    double det = 0;
    for (int i = 0; i <= j; ++i) {
      const auto& x = D[static_cast<std::size_t>(i)];
      const auto& y = D[static_cast<std::size_t>(j - i)];
      det += x(0, 0) * y(1, 1) - x(0, 1) * y(1, 0);
    }
    double f = factorial(j);
    const auto& Dj = D[static_cast<std::size_t>(j)];
    rep.matrix(0, j - 1) = det * f;
    rep.matrix(1, j - 1) = Dj(0, 0) * f;
    rep.matrix(2, j - 1) = Dj(0, 1) * f;
    rep.matrix(3, j - 1) = Dj(1, 1) * f;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rep.matrix);
  rep.singular_values = svd.singularValues();
  double smax = rep.singular_values.size() ? rep.singular_values(0) : 0.0;
  for (int i = 0; i < rep.singular_values.size(); ++i)
    if (rep.singular_values(i) > rel_tol * smax) ++rep.rank;
  Eigen::MatrixXd B = rep.matrix.bottomRows(3).transpose();
  Eigen::VectorXd r0 = rep.matrix.row(0).transpose();
  Eigen::VectorXd c = B.completeOrthogonalDecomposition().solve(r0);
  double denom = std::max(r0.norm(), 1e-300);
  rep.first_row_residual = (B * c - r0).norm() / denom;
  rep.first_row_in_span = r0.norm() <= rel_tol * smax || rep.first_row_residual <= 1e-8;
  rep.full_rank = rep.rank == 4;
  return rep;
}

// Union over |t| <= T of N_delta({(Omega - A(t)) xi : |xi| <= 1}) x {t},
// voxelized on the delta-grid, with T = delta^(1/(m+1)) (T = 1 for m infinite).
struct WitnessSet {
  VoxelSet cells;
  double t_max = 0.0;
  double min_curve_density = 0.0;  // min over sampled xi of |l cap E| / T
};

inline WitnessSet compression_witness_set(const MatrixPoly& A, const Eigen::Matrix2d& W, double delta, int m,
                                          bool infinite, int density_samples = 64) {
  WitnessSet out;
  out.t_max = infinite ? 1.0 : std::pow(delta, 1.0 / (m + 1));
  out.cells.delta = delta;
  const double r = delta * (1.0 + std::sqrt(0.5));
  int kmax = static_cast<int>(std::ceil(out.t_max / delta));
  std::vector<std::uint64_t> keys;
  for (int k = -kmax; k < kmax; ++k) {
    double t = (k + 0.5) * delta;
    if (std::abs(t) > out.t_max) continue;
    Eigen::Matrix2d M = W - A.at(t);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU);
    Eigen::Vector2d s = svd.singularValues();
    Eigen::Matrix2d U = svd.matrixU();
    Eigen::Matrix2d Q = U * Eigen::Vector2d(1.0 / ((s(0) + r) * (s(0) + r)), 1.0 / ((s(1) + r) * (s(1) + r))).asDiagonal() *
                        U.transpose();
    double xr = std::sqrt(Q(1, 1) / Q.determinant());  // half-width in x
    int ilo = static_cast<int>(std::floor(-xr / delta - 0.5)), ihi = static_cast<int>(std::ceil(xr / delta - 0.5));
    for (int i = ilo; i <= ihi; ++i) {
      double x = (i + 0.5) * delta;
      double disc = (Q(0, 1) * x) * (Q(0, 1) * x) - Q(1, 1) * (Q(0, 0) * x * x - 1.0);
      if (disc < 0) continue;
      double sq = std::sqrt(disc);
      double ylo = (-Q(0, 1) * x - sq) / Q(1, 1), yhi = (-Q(0, 1) * x + sq) / Q(1, 1);
      int jlo = static_cast<int>(std::ceil(ylo / delta - 0.5)), jhi = static_cast<int>(std::floor(yhi / delta - 0.5));
      for (int j = jlo; j <= jhi; ++j) keys.push_back(pack_cell(i, j, k));
    }
  }
  out.cells = VoxelSet::from_keys(delta, std::move(keys));
  double best = std::numeric_limits<double>::infinity();
  double dt = delta / 2;
  for (int s = 0; s < density_samples; ++s) {
    double ang = 2.0 * 3.14159265358979323846 * s / density_samples;
    double rad = 0.25 + 0.75 * ((s * 7) % density_samples) / density_samples;
    Eigen::Vector2d xi(rad * std::cos(ang), rad * std::sin(ang));
    int hits = 0;
    for (double t = -out.t_max + dt / 2; t < out.t_max; t += dt) {
      Eigen::Vector2d x = (W - A.at(t)) * xi;
      if (out.cells.contains(cell_of(x(0), x(1), t, delta))) ++hits;
    }
    best = std::min(best, hits * dt / out.t_max);
  }
  out.min_curve_density = best;
  return out;
}

}  // namespace kakeya
