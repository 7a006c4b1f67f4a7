#pragma once

// Coniness / twistiness classification of three-parameter curve families.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kakeya/families.hpp"
#include "kakeya/jet.hpp"
#include "kakeya/parallel.hpp"

namespace kakeya {

enum class Coniness { Planey, Coney };
enum class Flatness { Twisty, Flat2, Flat1 };

inline const char* to_string(Coniness c) { return c == Coniness::Planey ? "planey" : "coney"; }
inline const char* to_string(Flatness f) {
  switch (f) {
    case Flatness::Twisty:
      return "twisty";
    case Flatness::Flat2:
      return "flat2";
    default:
      return "flat1";
  }
}

struct ClassifyOptions {
  double cone_tol = 1e-9;  // relative to |w'|^3 + |w'||w''|
  double rank_tol = 1e-7;  // relative to the largest singular value
};

// Derivatives along the one-parameter family of curves through x = X(p, theta, t),
// in the curve parameter theta', at theta' = theta.
struct SpreadDerivatives {
  Vec2d p_dot, p_ddot, p_dddot;
  Vec2d omega, omega_dot, omega_ddot, omega_dddot;  // omega = d_t X
  double det_Xp = 0.0;
};

struct PointReport {
  double p1 = 0, p2 = 0, theta = 0, t = 0;
  SpreadDerivatives spread;
  double cone_det = 0.0;
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
  double det_M = 0.0;
  Coniness coniness = Coniness::Planey;
  Flatness flatness = Flatness::Twisty;
};

namespace detail {

using V3 = std::array<double, 3>;

struct Partials {
  const Vec2<Jet>* X;
  double operator()(int c, const MultiIndex& a) const { return (*X)[static_cast<std::size_t>(c)].partial(a); }

  MultiIndex idx(int i, int et) const {
    MultiIndex a{};
    if (i >= 0) a[static_cast<std::size_t>(i)] += 1;
    a[3] += et;
    return a;
  }

  double d1(int c, int et, const V3& u) const {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += (*this)(c, idx(i, et)) * u[static_cast<std::size_t>(i)];
    return s;
  }

  double d2(int c, int et, const V3& u, const V3& v) const {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        MultiIndex a = idx(i, et);
        a[static_cast<std::size_t>(j)] += 1;
        s += (*this)(c, a) * u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
      }
    return s;
  }

  double d3(int c, int et, const V3& u, const V3& v, const V3& w) const {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          MultiIndex a = idx(i, et);
          a[static_cast<std::size_t>(j)] += 1;
          a[static_cast<std::size_t>(k)] += 1;
          s += (*this)(c, a) * u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)] *
               w[static_cast<std::size_t>(k)];
        }
    return s;
  }
};

inline Vec2d solve2(double a, double b, double c, double d, const Vec2d& r) {
  double det = a * d - b * c;
  if (det == 0.0 || !std::isfinite(det)) throw SingularInput("singular parameter Jacobian d_p X");
  return {(d * r[0] - b * r[1]) / det, (-c * r[0] + a * r[1]) / det};
}

inline Vec2<Jet> evaluate_jets(const CurveFamily& F, double p1, double p2, double th, double t, int order) {
  const JetContext* c = JetContext::get(4, order);
  return F(Jet::variable(c, 0, p1), Jet::variable(c, 1, p2), Jet::variable(c, 2, th), Jet::variable(c, 3, t));
}

inline SpreadDerivatives spread_from_jets(const Vec2<Jet>& X) {
  Partials P{&X};
  SpreadDerivatives s;
  double a = P(0, P.idx(0, 0)), b = P(0, P.idx(1, 0));
  double c = P(1, P.idx(0, 0)), d = P(1, P.idx(1, 0));
  s.det_Xp = a * d - b * c;
  Vec2d Xth{P(0, P.idx(2, 0)), P(1, P.idx(2, 0))};
  s.p_dot = solve2(a, b, c, d, {-Xth[0], -Xth[1]});
  V3 q1{s.p_dot[0], s.p_dot[1], 1.0};
  s.p_ddot = solve2(a, b, c, d, {-P.d2(0, 0, q1, q1), -P.d2(1, 0, q1, q1)});
  V3 q2{s.p_ddot[0], s.p_ddot[1], 0.0};
  Vec2d r3;
  for (int k = 0; k < 2; ++k) r3[static_cast<std::size_t>(k)] = -(P.d3(k, 0, q1, q1, q1) + 3.0 * P.d2(k, 0, q1, q2));
  s.p_dddot = solve2(a, b, c, d, r3);
  V3 q3{s.p_dddot[0], s.p_dddot[1], 0.0};
  for (int k = 0; k < 2; ++k) {
    auto K = static_cast<std::size_t>(k);
    s.omega[K] = P(k, P.idx(-1, 1));
    s.omega_dot[K] = P.d1(k, 1, q1);
    s.omega_ddot[K] = P.d2(k, 1, q1, q1) + P.d1(k, 1, q2);
    s.omega_dddot[K] = P.d3(k, 1, q1, q1, q1) + 3.0 * P.d2(k, 1, q1, q2) + P.d1(k, 1, q3);
  }
  return s;
}

// Rows (proj, d_t proj, d_t^2 proj) with proj = [(d_p X)^T a w' ; (d_theta X)^T a w'],
// a = [[0, 1], [-1, 0]], differentiated in t at fixed (p, theta).
inline Eigen::Matrix3d tangency_from_jets(const Vec2<Jet>& X) {
  const JetContext* u = JetContext::get(1, 2);
  auto series = [&](int c, int var, int et) {
    MultiIndex b{};
    if (var >= 0) b[static_cast<std::size_t>(var)] = 1;
    b[3] = et;
    std::vector<double> s = t_series(X[static_cast<std::size_t>(c)], b, 3, 2);
    Jet j(u, 0.0);
    j.coefficients() = s;
    return j;
  };
  Jet a = series(0, 0, 0), b = series(0, 1, 0), c = series(1, 0, 0), d = series(1, 1, 0);
  Jet th1 = series(0, 2, 0), th2 = series(1, 2, 0);
  Jet inv = reciprocal(a * d - b * c);
  Jet pd1 = -(d * th1 - b * th2) * inv;
  Jet pd2 = -(-c * th1 + a * th2) * inv;
  Jet w1 = series(0, 0, 1) * pd1 + series(0, 1, 1) * pd2 + series(0, 2, 1);
  Jet w2 = series(1, 0, 1) * pd1 + series(1, 1, 1) * pd2 + series(1, 2, 1);
  // a w' = (w2, -w1)
  Jet pr1 = a * w2 - c * w1;
  Jet pr2 = b * w2 - d * w1;
  Jet pr3 = th1 * w2 - th2 * w1;
  Eigen::Matrix3d M;
  for (int k = 0; k < 3; ++k) {
    double f = factorial(k);
    auto K = static_cast<std::size_t>(k);
    M(k, 0) = pr1.coefficients()[K] * f;
    M(k, 1) = pr2.coefficients()[K] * f;
    M(k, 2) = pr3.coefficients()[K] * f;
  }
  return M;
}

}  // namespace detail

inline SpreadDerivatives spread_derivatives(const CurveFamily& F, double p1, double p2, double th, double t) {
  return detail::spread_from_jets(detail::evaluate_jets(F, p1, p2, th, t, 4));
}

inline Eigen::Matrix3d tangency_matrix(const CurveFamily& F, double p1, double p2, double th, double t) {
  return detail::tangency_from_jets(detail::evaluate_jets(F, p1, p2, th, t, 4));
}

inline PointReport classify_point(const CurveFamily& F, double p1, double p2, double th, double t,
                                  const ClassifyOptions& opt = {}) {
  auto X = detail::evaluate_jets(F, p1, p2, th, t, 4);
  PointReport r;
  r.p1 = p1, r.p2 = p2, r.theta = th, r.t = t;
  r.spread = detail::spread_from_jets(X);
  r.cone_det = det2(r.spread.omega_dot, r.spread.omega_ddot);
  r.M = detail::tangency_from_jets(X);
  r.det_M = r.M.determinant();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r.M);
  r.singular_values = svd.singularValues();
  double g = norm2(r.spread.omega_dot);
  double cone_scale = g * g * g + g * norm2(r.spread.omega_ddot);
  r.coniness = std::abs(r.cone_det) <= opt.cone_tol * cone_scale ? Coniness::Planey : Coniness::Coney;
  double smax = r.singular_values[0];
  int small = 0;
  for (int i = 0; i < 3; ++i)
    if (r.singular_values[i] <= opt.rank_tol * smax) ++small;
  if (smax == 0.0) small = 3;
  r.flatness = small == 0 ? Flatness::Twisty : small == 1 ? Flatness::Flat2 : Flatness::Flat1;
  return r;
}

struct GridPoint {
  double p1, p2, theta, t;
};

// n points per parameter axis over the family's parameter box, and n_t
// samples on each admissible t-interval; out-of-domain points are skipped.
inline std::vector<GridPoint> parameter_grid(const CurveFamily& F, int n, int n_t) {
  std::vector<GridPoint> out;
  auto axis = [&](int k, int i) {
    const Interval& iv = F.param_box[static_cast<std::size_t>(k)];
    return n == 1 ? 0.5 * (iv.lo + iv.hi) : iv.lo + iv.length() * i / (n - 1);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double p1 = axis(0, i), p2 = axis(1, j), th = axis(2, k);
        if (!F.params_in_domain(p1, p2, th)) continue;
        for (const auto& iv : F.t_domain(p1, p2, th))
          for (int m = 0; m < n_t; ++m) {
            double t = n_t == 1 ? 0.5 * (iv.lo + iv.hi) : iv.lo + iv.length() * m / (n_t - 1);
            out.push_back({p1, p2, th, t});
          }
      }
  return out;
}

struct RegionSummary {
  std::size_t points = 0;
  std::size_t planey = 0, coney = 0, twisty = 0, flat2 = 0, flat1 = 0;
  double min_abs_cone_det = std::numeric_limits<double>::infinity();
  double max_abs_cone_det = 0.0;
  double min_abs_det_M = std::numeric_limits<double>::infinity();
  double max_abs_det_M = 0.0;
  std::string coniness_label() const { return coney == points ? "coney" : planey == points ? "planey" : "mixed"; }
  std::string flatness_label() const {
    if (twisty == points) return "twisty";
    if (flat1 == points) return "flat1";
    if (flat2 == points) return "flat2";
    return "mixed";
  }
};

inline RegionSummary summarize(const std::vector<PointReport>& pts) {
  RegionSummary s;
  for (const auto& r : pts) {
    ++s.points;
    (r.coniness == Coniness::Planey ? s.planey : s.coney)++;
    if (r.flatness == Flatness::Twisty) ++s.twisty;
    else if (r.flatness == Flatness::Flat2) ++s.flat2;
    else ++s.flat1;
    s.min_abs_cone_det = std::min(s.min_abs_cone_det, std::abs(r.cone_det));
    s.max_abs_cone_det = std::max(s.max_abs_cone_det, std::abs(r.cone_det));
    s.min_abs_det_M = std::min(s.min_abs_det_M, std::abs(r.det_M));
    s.max_abs_det_M = std::max(s.max_abs_det_M, std::abs(r.det_M));
  }
  return s;
}

inline std::vector<PointReport> classify_grid(const CurveFamily& F, int n, int n_t, int workers = 1,
                                              const ClassifyOptions& opt = {}) {
  auto pts = parameter_grid(F, n, n_t);
  return parallel_map<PointReport>(pts.size(), workers, [&](std::size_t i) {
    const auto& g = pts[i];
    return classify_point(F, g.p1, g.p2, g.theta, g.t, opt);
  });
}

// Finite-difference oracle: w(theta') = d_t X(hat p(theta'), theta', t), central
// differences at steps h and h/2 combined by Richardson extrapolation.
struct FdSpread {
  Vec2d omega_dot, omega_ddot;
};

inline FdSpread spread_derivatives_fd(const CurveFamily& F, double p1, double p2, double th, double t,
                                      double h = 1e-2) {
  const JetContext* c = JetContext::get(1, 1);
  auto omega = [&](double thp) {
    Vec2d q = (thp == th) ? Vec2d{p1, p2} : solve_hat_p(F, {p1, p2}, th, t, thp);
    auto X = F(Jet::constant(c, q[0]), Jet::constant(c, q[1]), Jet::constant(c, thp), Jet::variable(c, 0, t));
    return Vec2d{X[0].coefficients()[1], X[1].coefficients()[1]};
  };
  Vec2d w0 = omega(th);
  auto diffs = [&](double s, Vec2d& d1, Vec2d& d2) {
    Vec2d wp = omega(th + s), wm = omega(th - s);
    for (int k = 0; k < 2; ++k) {
      auto K = static_cast<std::size_t>(k);
      d1[K] = (wp[K] - wm[K]) / (2 * s);
      d2[K] = (wp[K] - 2 * w0[K] + wm[K]) / (s * s);
    }
  };
  Vec2d a1, a2, b1, b2;
  diffs(h, a1, a2);
  diffs(h / 2, b1, b2);
  FdSpread out;
  for (int k = 0; k < 2; ++k) {
    auto K = static_cast<std::size_t>(k);
    out.omega_dot[K] = (4 * b1[K] - a1[K]) / 3;
    out.omega_ddot[K] = (4 * b2[K] - a2[K]) / 3;
  }
  return out;
}

// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    double wt = 2.0 / ((1.0 - z * z) * pp * pp);
    x[static_cast<std::size_t>(i)] = 0.5 * (1.0 - z);
    x[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + z);
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] = 0.5 * wt;
  }
}

// Closed-form spread direction of a hairbrush family:
// (t - theta)^-1 H_t(tau t, xi0 + sigma xi) J^-1 K xi, with H_t = d_t Hess psi,
// K = int_0^1 H_t(tau theta, xi0 + s sigma xi) ds, J = int_0^1 H_t(tau(theta + s(t - theta)), xi0 + sigma xi) ds.
inline Vec2d hairbrush_gamma_oracle(const PhaseFunction& phase, const HairbrushParams& hp, const Vec2d& xi,
                                    double th, double t, int nodes = 32) {
  if (std::abs(t - th) < hp.c0) throw DomainError("hairbrush oracle: |t - theta| below c0");
  std::vector<double> x, w;
  gauss_legendre_01(nodes, x, w);
  Vec2d y{hp.xi0[0] + hp.sigma * xi[0], hp.xi0[1] + hp.sigma * xi[1]};
  Eigen::Matrix2d K = Eigen::Matrix2d::Zero(), J = Eigen::Matrix2d::Zero();
  for (int i = 0; i < nodes; ++i) {
    double s = x[static_cast<std::size_t>(i)], wt = w[static_cast<std::size_t>(i)];
    K += wt * phase.dt_hessian(hp.tau * th, {hp.xi0[0] + s * hp.sigma * xi[0], hp.xi0[1] + s * hp.sigma * xi[1]});
    J += wt * phase.dt_hessian(hp.tau * (th + s * (t - th)), y);
  }
  if (std::abs(J.determinant()) < 1e-300) throw SingularInput("hairbrush oracle: singular J");
  Eigen::Vector2d v = phase.dt_hessian(hp.tau * t, y) * J.inverse() * K * Eigen::Vector2d(xi[0], xi[1]);
  v /= (t - th);
  return {v[0], v[1]};
}

// Open condition for A(t) = t I_- + t^2 B + t^3 C (+ higher order).
struct OpenCondition {
  double margin = 0.0;         // positive iff the condition holds
  double sym_det = 0.0;        // det Sym(Q)
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  bool holds = false;
};

inline OpenCondition open_condition(const Eigen::Matrix2d& B, const Eigen::Matrix2d& C) {
  OpenCondition oc;
  double b11 = B(0, 0), b12 = B(0, 1), b22 = B(1, 1);
  double c11 = C(0, 0), c12 = C(0, 1), c22 = C(1, 1);
  oc.margin = std::abs(b12 * (b22 - b11) + c12) - 0.5 * std::abs((b22 + b11) * (b22 - b11) + c11 + c22);
  Eigen::Matrix2d Im = minus_identity();
  Eigen::Matrix2d a;
  a << 0, 1, -1, 0;
  oc.Q = Im * a * (B * Im * B - C);
  Eigen::Matrix2d S = 0.5 * (oc.Q + oc.Q.transpose());
  oc.sym_det = S.determinant();
  oc.holds = oc.margin > 0.0;
  return oc;
}

// Transversality of three curves through one point: unit tangent directions
// (w_i, 1)/|(w_i, 1)| with w_i = d_t X(hat p_i, theta_i, t).
struct TransversalitySample {
  double det = 0.0;
  double min_cone = 0.0;
  double ratio = 0.0;  // |det| / (min_cone (r/K)^3)
};

inline TransversalitySample transversality_sample(const CurveFamily& F, const Vec2d& p, double th, double t,
                                                  const std::array<double, 3>& thetas, double r, double K) {
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      double g = std::abs(thetas[static_cast<std::size_t>(i)] - thetas[static_cast<std::size_t>(j)]);
      if (g < r / K * (1.0 - 1e-12) || g > r * (1.0 + 1e-12))
        throw DomainError("transversality: theta separation outside [r/K, r]");
    }
  Eigen::Matrix3d N;
  double cmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    double thi = thetas[static_cast<std::size_t>(i)];
    Vec2d q = solve_hat_p(F, p, th, t, thi);
    SpreadDerivatives s = spread_derivatives(F, q[0], q[1], thi, t);
    Eigen::Vector3d n(s.omega[0], s.omega[1], 1.0);
    N.row(i) = n.normalized();
    cmin = std::min(cmin, std::abs(det2(s.omega_dot, s.omega_ddot)));
  }
  TransversalitySample out;
  out.det = N.determinant();
  out.min_cone = cmin;
  out.ratio = std::abs(out.det) / (cmin * std::pow(r / K, 3));
  return out;
}

// Grain projection pi_p(x, t) = (t, <x - X(p, t), gamma_p(t)^perp>) with a
// unit-normalized counterclockwise normal.
struct GrainProjection {
  const CurveFamily* F;
  double p1, p2, theta;

  Vec2d gamma_perp(double t) const {
    SpreadDerivatives s = spread_derivatives(*F, p1, p2, theta, t);
    double n = norm2(s.omega_dot);
    if (n == 0.0) throw SingularInput("grain projection: vanishing gamma");
    return perp(Vec2d{s.omega_dot[0] / n, s.omega_dot[1] / n});
  }

  Vec2d operator()(const Vec2d& x, double t) const {
    Vec2d c = (*F)(p1, p2, theta, t);
    return {t, dot2(Vec2d{x[0] - c[0], x[1] - c[1]}, gamma_perp(t))};
  }

  // First-order model <d_(p,theta) X (q - p), gamma^perp>.
  double linear_model(const Vec3d& q, double t) const {
    const JetContext* c = JetContext::get(3, 1);
    auto X = (*F)(Jet::variable(c, 0, p1), Jet::variable(c, 1, p2), Jet::variable(c, 2, theta), Jet::constant(c, t));
    Vec2d d{0, 0};
    const double dq[3] = {q[0] - p1, q[1] - p2, q[2] - theta};
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 3; ++i)
        d[static_cast<std::size_t>(k)] += X[static_cast<std::size_t>(k)].coefficients()[static_cast<std::size_t>(1 + i)] * dq[i];
    return dot2(d, gamma_perp(t));
  }
};

struct BasicConditionsReport {
  std::size_t points = 0;
  double min_abs_det_Xp = std::numeric_limits<double>::infinity();
  double min_gamma = std::numeric_limits<double>::infinity();
  double max_gamma = 0.0;
  double max_tangency_entry = 0.0;
  double max_omega_ddot = 0.0;
  double max_omega_dddot = 0.0;
  bool ok = false;
};

inline BasicConditionsReport basic_conditions_report(const CurveFamily& F, int n, int n_t, double floor = 1e-8,
                                                     int workers = 1) {
  auto reps = classify_grid(F, n, n_t, workers);
  BasicConditionsReport b;
  for (const auto& r : reps) {
    ++b.points;
    b.min_abs_det_Xp = std::min(b.min_abs_det_Xp, std::abs(r.spread.det_Xp));
    double g = norm2(r.spread.omega_dot);
    b.min_gamma = std::min(b.min_gamma, g);
    b.max_gamma = std::max(b.max_gamma, g);
    b.max_tangency_entry = std::max(b.max_tangency_entry, r.M.cwiseAbs().maxCoeff());
    b.max_omega_ddot = std::max(b.max_omega_ddot, norm2(r.spread.omega_ddot));
    b.max_omega_dddot = std::max(b.max_omega_dddot, norm2(r.spread.omega_dddot));
  }
  b.ok = b.points > 0 && b.min_abs_det_Xp > floor && b.min_gamma > floor;
  return b;
}

}  // namespace kakeya
