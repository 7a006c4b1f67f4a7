#pragma once

// Phase functions, curve families X(p, theta, t) and the standard examples.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/jet.hpp"

namespace kakeya {

// A(t) = sum_k t^k A_k with A_0 = 0.
struct MatrixPoly {
  std::vector<Eigen::Matrix2d> a;  // a[k] multiplies t^k

  int degree() const { return static_cast<int>(a.size()) - 1; }

  Eigen::Matrix2d coeff(int k) const {
    if (k < 0 || k > degree()) return Eigen::Matrix2d::Zero();
    return a[static_cast<std::size_t>(k)];
  }

  Eigen::Matrix2d at(double t) const {
    Eigen::Matrix2d r = Eigen::Matrix2d::Zero();
    for (int k = degree(); k >= 0; --k) r = r * t + a[static_cast<std::size_t>(k)];
    return r;
  }

  // Coefficients of det A(t).
  std::vector<double> det_coeffs() const {
    int d = degree();
    std::vector<double> r(static_cast<std::size_t>(2 * std::max(d, 0) + 1), 0.0);
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j) {
        const auto& x = a[static_cast<std::size_t>(i)];
        const auto& y = a[static_cast<std::size_t>(j)];
        r[static_cast<std::size_t>(i + j)] += x(0, 0) * y(1, 1) - x(0, 1) * y(1, 0);
      }
    return r;
  }

  // Errors on non-symmetric coefficients, A_0 != 0 or singular A_1.
  void validate() const {
    if (a.size() < 2) throw DomainError("matrix poly: degree must be at least 1");
    for (const auto& m : a)
      if (std::abs(m(0, 1) - m(1, 0)) > 1e-12) throw DomainError("matrix poly: non-symmetric coefficient");
    if (a[0].norm() > 1e-12) throw DomainError("matrix poly: A_0 must vanish");
    if (std::abs(a[1].determinant()) < 1e-12) throw DomainError("matrix poly: A_1 is singular");
  }

  static MatrixPoly from_terms(std::initializer_list<Eigen::Matrix2d> terms) {
    MatrixPoly p;
    p.a.push_back(Eigen::Matrix2d::Zero());
    for (const auto& m : terms) p.a.push_back(m);
    return p;
  }
};

inline Eigen::Matrix2d sym2(double a11, double a12, double a22) {
  Eigen::Matrix2d m;
  m << a11, a12, a12, a22;
  return m;
}

inline Eigen::Matrix2d minus_identity() { return sym2(1.0, 0.0, -1.0); }

// Translation-invariant phase psi(t, xi). Curves are l_{xi,v}(t) = v - grad_xi psi(t, xi).
struct PhaseFunction {
  std::string label;
  std::function<double(double, double, double)> psi_d;
  std::function<Jet(const Jet&, const Jet&, const Jet&)> psi_j;
  double xi_radius = 1.0;  // directions live in [-r, r]^2
  std::optional<MatrixPoly> model;

  double operator()(double t, double x1, double x2) const { return psi_d(t, x1, x2); }
  Jet operator()(const Jet& t, const Jet& x1, const Jet& x2) const { return psi_j(t, x1, x2); }

  Vec2d grad(double t, double x1, double x2) const {
    const JetContext* c = JetContext::get(2, 1);
    Jet v = psi_j(Jet::constant(c, t), Jet::variable(c, 0, x1), Jet::variable(c, 1, x2));
    return {v.coefficients()[1], v.coefficients()[2]};
  }

  // Gradient of a jet-valued argument: two extra variables, one more order.
  Vec2<Jet> grad(const Jet& t, const Jet& x1, const Jet& x2) const {
    const JetContext* src = t.context();
    int k = src->num_vars();
    const JetContext* big = JetContext::get(k + 2, src->order() + 1);
    std::vector<int> id(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) id[static_cast<std::size_t>(i)] = i;
    Jet tt = embed(t, big, id);
    Jet y1 = embed(x1, big, id) + Jet::variable(big, k, 0.0);
    Jet y2 = embed(x2, big, id) + Jet::variable(big, k + 1, 0.0);
    Jet v = psi_j(tt, y1, y2);
    return {coefficient_slice(v, k, 1, src), coefficient_slice(v, k + 1, 1, src)};
  }

  // Taylor coefficients H_j of s -> Hess_xi psi(t0 + s, xi0), j = 0..k.
  std::vector<Eigen::Matrix2d> hessian_series(double t0, const Vec2d& xi0, int k) const {
    const JetContext* c = JetContext::get(3, k + 2);
    Jet v = psi_j(Jet::variable(c, 0, t0), Jet::variable(c, 1, xi0[0]), Jet::variable(c, 2, xi0[1]));
    std::vector<Eigen::Matrix2d> out(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
      double h11 = v.coeff({j, 2, 0}) * 2.0;
      double h12 = v.coeff({j, 1, 1});
      double h22 = v.coeff({j, 0, 2}) * 2.0;
      out[static_cast<std::size_t>(j)] = sym2(h11, h12, h22);
    }
    return out;
  }

  Eigen::Matrix2d dt_hessian(double t, const Vec2d& xi) const { return hessian_series(t, xi, 1)[1]; }
};

template <class F>
PhaseFunction make_phase(std::string label, F f, double xi_radius = 1.0) {
  PhaseFunction p;
  p.label = std::move(label);
  p.psi_d = [f](double t, double a, double b) { return f(t, a, b); };
  p.psi_j = [f](const Jet& t, const Jet& a, const Jet& b) { return f(t, a, b); };
  p.xi_radius = xi_radius;
  return p;
}

template <class T>
T model_psi(const MatrixPoly& A, const T& t, const T& x1, const T& x2) {
  auto q = [&](int k) {
    const auto& m = A.a[static_cast<std::size_t>(k)];
    return 0.5 * m(0, 0) * x1 * x1 + m(0, 1) * x1 * x2 + 0.5 * m(1, 1) * x2 * x2;
  };
  T r = q(A.degree());
  for (int k = A.degree() - 1; k >= 0; --k) r = r * t + q(k);
  return r;
}

inline PhaseFunction model_phase(const MatrixPoly& A, std::string label = "model") {
  A.validate();
  PhaseFunction p = make_phase(std::move(label), [A](const auto& t, const auto& x1, const auto& x2) {
    return model_psi(A, t, x1, x2);
  });
  p.model = A;
  return p;
}

inline PhaseFunction parabolic_phase() {
  return model_phase(MatrixPoly::from_terms({Eigen::Matrix2d::Identity()}), "parabolic");
}

inline PhaseFunction hyperbolic_phase() {
  return model_phase(MatrixPoly::from_terms({minus_identity()}), "hyperbolic");
}

// psi = <A(t) xi, xi> / 2 with A(t) = [[0, t], [t, t^2]].
inline PhaseFunction worst_phase() {
  return model_phase(MatrixPoly::from_terms({sym2(0, 1, 0), sym2(0, 0, 1)}), "worst");
}

// log sec(t xi_1) + t^2 xi_2^2 / 2, the x = 0 slice of the tan example.
inline PhaseFunction tan_phase() {
  return make_phase("tan", [](const auto& t, const auto& x1, const auto& x2) {
    return -log(cos(t * x1)) + 0.5 * t * t * x2 * x2;
  });
}

// psi^tau(t, xi) = psi(tau t, xi) / tau, whose curves are the rescaled family.
inline PhaseFunction rescale_phase(const PhaseFunction& phase, double tau) {
  if (!(tau > 0.0)) throw DomainError("rescale: tau must be positive");
  PhaseFunction p = phase;
  p.label = phase.label + "^tau";
  auto base_d = phase.psi_d;
  auto base_j = phase.psi_j;
  p.psi_d = [base_d, tau](double t, double a, double b) { return base_d(tau * t, a, b) / tau; };
  p.psi_j = [base_j, tau](const Jet& t, const Jet& a, const Jet& b) { return base_j(tau * t, a, b) / tau; };
  p.model.reset();
  return p;
}

// Curves l_{xi,v}(t) = v - grad psi(t, xi).
inline Vec2d phase_curve(const PhaseFunction& phase, const Vec2d& xi, const Vec2d& v, double t) {
  Vec2d g = phase.grad(t, xi[0], xi[1]);
  return {v[0] - g[0], v[1] - g[1]};
}

// Three-parameter family X(p1, p2, theta, t) in R^2.
struct CurveFamily {
  std::string label;
  std::function<Vec2d(double, double, double, double)> eval_d;
  std::function<Vec2<Jet>(const Jet&, const Jet&, const Jet&, const Jet&)> eval_j;
  std::array<Interval, 3> param_box{};
  std::function<bool(double, double, double)> param_ok;
  std::function<std::vector<Interval>(double, double, double)> t_domain;

  Vec2d operator()(double p1, double p2, double th, double t) const { return eval_d(p1, p2, th, t); }
  Vec2<Jet> operator()(const Jet& p1, const Jet& p2, const Jet& th, const Jet& t) const {
    return eval_j(p1, p2, th, t);
  }

  bool params_in_domain(double p1, double p2, double th) const {
    for (int i = 0; i < 3; ++i) {
      double v = (i == 0 ? p1 : i == 1 ? p2 : th);
      if (!param_box[static_cast<std::size_t>(i)].contains(v)) return false;
    }
    return !param_ok || param_ok(p1, p2, th);
  }

  bool in_domain(double p1, double p2, double th, double t) const {
    if (!params_in_domain(p1, p2, th)) return false;
    for (const auto& iv : t_domain(p1, p2, th))
      if (iv.contains(t)) return true;
    return false;
  }
};

template <class F>
CurveFamily make_family(std::string label, F f, std::array<Interval, 3> box,
                        std::function<bool(double, double, double)> ok,
                        std::function<std::vector<Interval>(double, double, double)> tdom) {
  CurveFamily c;
  c.label = std::move(label);
  c.eval_d = [f](double a, double b, double th, double t) { return f(a, b, th, t); };
  c.eval_j = [f](const Jet& a, const Jet& b, const Jet& th, const Jet& t) { return f(a, b, th, t); };
  c.param_box = box;
  c.param_ok = std::move(ok);
  c.t_domain = std::move(tdom);
  return c;
}

inline bool in_annulus(double x1, double x2, double lo = 0.5, double hi = 1.0) {
  double r = std::hypot(x1, x2);
  return r >= lo - 1e-12 && r <= hi + 1e-12;
}

// t in [center - 1, center + 1] with |t - theta| in [gap_lo, gap_hi].
inline std::vector<Interval> separated_t_domain(double theta, double center, double gap_lo, double gap_hi) {
  std::vector<Interval> out;
  Interval left{std::max(center - 1.0, theta - gap_hi), theta - gap_lo};
  Interval right{theta + gap_lo, std::min(center + 1.0, theta + gap_hi)};
  if (left.hi >= left.lo) out.push_back(left);
  if (right.hi >= right.lo) out.push_back(right);
  return out;
}

// X = (theta - t) xi on 1/2 <= |t - theta| <= 1, 1/2 <= |xi| <= 1.
inline CurveFamily straight_hairbrush() {
  return make_family(
      "straight-hairbrush",
      [](const auto& x1, const auto& x2, const auto& th, const auto& t) {
        auto s = th - t;
        return Vec2<std::decay_t<decltype(s)>>{s * x1, s * x2};
      },
      {Interval{-1, 1}, Interval{-1, 1}, Interval{-0.5, 0.5}},
      [](double x1, double x2, double) { return in_annulus(x1, x2); },
      [](double, double, double th) {
        return std::vector<Interval>{{th - 1.0, th - 0.5}, {th + 0.5, th + 1.0}};
      });
}

// Hairbrush of the worst phase at xi0 = 0.
inline CurveFamily worst_hairbrush(double c0 = 0.25) {
  return make_family(
      "worst-hairbrush",
      [](const auto& x1, const auto& x2, const auto& th, const auto& t) {
        auto d = t - th;
        return Vec2<std::decay_t<decltype(d)>>{d * x2, d * x1 + (t * t - th * th) * x2};
      },
      {Interval{-1, 1}, Interval{-1, 1}, Interval{-1, 1}},
      [](double x1, double x2, double) { return in_annulus(x1, x2); },
      [c0](double, double, double th) { return separated_t_domain(th, 0.0, c0, 2.0); });
}

// X = ((t - theta) I_- + (t^2 - theta^2) B) xi.
inline CurveFamily quadratic_hairbrush(const Eigen::Matrix2d& B, double c0 = 0.25) {
  double b11 = B(0, 0), b12 = B(0, 1), b22 = B(1, 1);
  return make_family(
      "quadratic-hairbrush",
      [=](const auto& x1, const auto& x2, const auto& th, const auto& t) {
        auto d = t - th;
        auto q = t * t - th * th;
        using T = std::decay_t<decltype(d)>;
        return Vec2<T>{d * x1 + q * (b11 * x1 + b12 * x2), -(d * x2) + q * (b12 * x1 + b22 * x2)};
      },
      {Interval{-1, 1}, Interval{-1, 1}, Interval{-1, 1}},
      [](double x1, double x2, double) { return in_annulus(x1, x2); },
      [c0](double, double, double th) { return separated_t_domain(th, 0.0, c0, 2.0); });
}

// Lines (a, b, 0) + s (c, d, 1) with ad - bc = 1; p = (a, b), theta = c.
inline CurveFamily sl2_chart() {
  return make_family(
      "sl2-chart",
      [](const auto& a, const auto& b, const auto& c, const auto& t) {
        auto d = (1.0 + b * c) / a;
        using T = std::decay_t<decltype(d)>;
        return Vec2<T>{a + c * t, b + d * t};
      },
      {Interval{0.5, 1.5}, Interval{-0.5, 0.5}, Interval{-0.25, 0.25}}, nullptr,
      [](double, double, double) { return std::vector<Interval>{{-1.0, 1.0}}; });
}

struct HairbrushParams {
  Vec2d xi0{0.0, 0.0};
  double tau = 1.0;
  double sigma = 1.0;
  double t0 = 0.0;
  double c0 = 0.25;
  double c1 = 0.1;
  bool enforce_sigma = true;  // require c1 tau >= sigma
};

// X(xi, theta, t) = Phi_xi0(sigma xi, tau theta, tau t) / (sigma tau) with
// Phi_xi0(xi, theta, t) = g(t, xi0 + xi) - g(theta, xi0 + xi) + g(theta, xi0) - g(t, xi0), g = grad psi.
inline CurveFamily hairbrush_family(const PhaseFunction& phase, const HairbrushParams& hp) {
  if (!(hp.tau > 0.0) || !(hp.sigma > 0.0)) throw DomainError("hairbrush: tau and sigma must be positive");
  if (hp.enforce_sigma && hp.c1 * hp.tau < hp.sigma * (1.0 - 1e-12))
    throw DomainError("hairbrush: sigma exceeds c1 tau");
  auto f = [phase, hp](const auto& x1, const auto& x2, const auto& th, const auto& t) {
    double s = hp.sigma, tau = hp.tau;
    auto y1 = hp.xi0[0] + s * x1;
    auto y2 = hp.xi0[1] + s * x2;
    auto tt = tau * t;
    auto tth = tau * th;
    auto z1 = x1 * 0.0 + hp.xi0[0];
    auto z2 = x2 * 0.0 + hp.xi0[1];
    auto a = phase.grad(tt, y1, y2);
    auto b = phase.grad(tth, y1, y2);
    auto c = phase.grad(tth, z1, z2);
    auto d = phase.grad(tt, z1, z2);
    using T = std::decay_t<decltype(a[0])>;
    double k = 1.0 / (s * tau);
    return Vec2<T>{(a[0] - b[0] + c[0] - d[0]) * k, (a[1] - b[1] + c[1] - d[1]) * k};
  };
  double t0 = hp.t0, c0 = hp.c0;
  return make_family(
      "hairbrush:" + phase.label, f, {Interval{-1, 1}, Interval{-1, 1}, Interval{t0 - 1.0, t0 + 1.0}},
      [](double x1, double x2, double) { return in_annulus(x1, x2); },
      [t0, c0](double, double, double th) { return separated_t_domain(th, t0, c0, 2.0); });
}

// Parameters of the default model phase, which satisfies the open condition.
inline Eigen::Matrix2d default_model_B() { return sym2(0.05, 0.025, -0.025); }
inline Eigen::Matrix2d default_model_C() { return sym2(0.005, 0.075, -0.0025); }

inline MatrixPoly default_model_poly() {
  return MatrixPoly::from_terms({minus_identity(), default_model_B(), default_model_C()});
}

inline PhaseFunction phase_by_label(const std::string& label) {
  if (label == "parabolic") return parabolic_phase();
  if (label == "hyperbolic") return hyperbolic_phase();
  if (label == "worst") return worst_phase();
  if (label == "tan") return tan_phase();
  if (label == "model") return model_phase(default_model_poly(), "model");
  throw DomainError("unknown phase label: " + label);
}

inline HairbrushParams default_hairbrush_params(const std::string& phase_label) {
  HairbrushParams hp;
  if (phase_label == "tan") {
    hp.xi0 = {0.3, 0.2};
    hp.t0 = 2.0;
    hp.tau = 0.5;
    hp.sigma = 0.05;
  } else if (phase_label == "model") {
    hp.xi0 = {0.2, -0.1};
    hp.tau = 0.5;
    hp.sigma = 0.05;
  } else {
    hp.sigma = hp.c1 * hp.tau;
  }
  return hp;
}

inline std::vector<std::string> builtin_family_labels() {
  return {"straight-hairbrush", "worst-hairbrush",      "quadratic-hairbrush", "sl2-chart",
          "hairbrush:parabolic", "hairbrush:hyperbolic", "hairbrush:worst",     "hairbrush:model",
          "hairbrush:tan"};
}

inline CurveFamily family_by_label(const std::string& label) {
  if (label == "straight-hairbrush") return straight_hairbrush();
  if (label == "worst-hairbrush") return worst_hairbrush();
  if (label == "quadratic-hairbrush") return quadratic_hairbrush(default_model_B());
  if (label == "sl2-chart") return sl2_chart();
  const std::string prefix = "hairbrush:";
  if (label.rfind(prefix, 0) == 0) {
    std::string ph = label.substr(prefix.size());
    return hairbrush_family(phase_by_label(ph), default_hairbrush_params(ph));
  }
  throw DomainError("unknown family label: " + label);
}

// Newton solve for p' with X(p', theta', t) = X(p, theta, t), continued in theta.
inline Vec2d solve_hat_p(const CurveFamily& F, const Vec2d& p, double theta, double t, double theta_new,
                         int steps = 8, double tol = 1e-13) {
  Vec2d target = F(p[0], p[1], theta, t);
  Vec2d q = p;
  const JetContext* c = JetContext::get(2, 1);
  for (int s = 1; s <= steps; ++s) {
    double th = theta + (theta_new - theta) * s / steps;
    bool done = false;
    for (int it = 0; it < 50; ++it) {
      auto X = F(Jet::variable(c, 0, q[0]), Jet::variable(c, 1, q[1]), Jet::constant(c, th), Jet::constant(c, t));
      double r1 = X[0].value() - target[0], r2 = X[1].value() - target[1];
      double a = X[0].coefficients()[1], b = X[0].coefficients()[2];
      double cc = X[1].coefficients()[1], d = X[1].coefficients()[2];
      double det = a * d - b * cc;
      if (std::abs(det) < 1e-300) throw SingularInput("solve_hat_p: singular parameter Jacobian");
      double d1 = (d * r1 - b * r2) / det;
      double d2 = (-cc * r1 + a * r2) / det;
      q[0] -= d1;
      q[1] -= d2;
      double scale = 1.0 + std::abs(target[0]) + std::abs(target[1]);
      if (std::hypot(d1, d2) < tol * (1.0 + std::hypot(q[0], q[1])) && std::hypot(r1, r2) < 1e-10 * scale) {
        done = true;
        break;
      }
    }
    if (!done) throw ConvergenceError("solve_hat_p: Newton did not converge");
  }
  return q;
}

struct ClosestApproach {
  double t = 0.0;
  double distance = 0.0;
};

// Minimizes |X(p, t) - X(q, t)| over t in iv: 64-point grid seed, then 1-D Newton.
inline ClosestApproach closest_approach(const CurveFamily& F, const Vec3d& p, const Vec3d& q, Interval iv) {
  auto gap = [&](double t) {
    Vec2d a = F(p[0], p[1], p[2], t), b = F(q[0], q[1], q[2], t);
    return Vec2d{a[0] - b[0], a[1] - b[1]};
  };
  const int n = 64;
  double best_t = iv.lo, best = norm2(gap(iv.lo));
  for (int i = 1; i <= n; ++i) {
    double t = iv.lo + iv.length() * i / n;
    double g = norm2(gap(t));
    if (g < best) best = g, best_t = t;
  }
  const JetContext* c = JetContext::get(1, 2);
  double t = best_t;
  for (int it = 0; it < 40; ++it) {
    Jet tj = Jet::variable(c, 0, t);
    auto a = F(Jet::constant(c, p[0]), Jet::constant(c, p[1]), Jet::constant(c, p[2]), tj);
    auto b = F(Jet::constant(c, q[0]), Jet::constant(c, q[1]), Jet::constant(c, q[2]), tj);
    Jet g = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
    double g1 = g.coefficients()[1], g2 = 2.0 * g.coefficients()[2];
    if (g2 <= 0.0) break;
    double step = g1 / g2;
    double tn = std::clamp(t - step, iv.lo, iv.hi);
    if (std::abs(tn - t) < 1e-14) {
      t = tn;
      break;
    }
    t = tn;
  }
  double d = norm2(gap(t));
  if (d > best) return {best_t, best};
  return {t, d};
}

}  // namespace kakeya
