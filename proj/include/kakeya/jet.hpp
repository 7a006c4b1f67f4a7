#pragma once

// Dense truncated multivariate Taylor jets.
//
// A Jet stores the Taylor coefficients c_alpha = d^alpha f / alpha! of a
// function of up to kMaxVars variables, truncated at total degree `order`.
// Arithmetic is exact up to the truncation order.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace kakeya {

inline constexpr int kMaxVars = 6;
inline constexpr int kMaxOrder = 10;

using MultiIndex = std::array<int, kMaxVars>;

class JetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double multi_factorial(const MultiIndex& a) {
  double r = 1.0;
  for (int v : a) r *= factorial(v);
  return r;
}

inline int degree_of(const MultiIndex& a) {
  int d = 0;
  for (int v : a) d += v;
  return d;
}

class JetContext {
 public:
  struct Product {
    std::uint32_t lhs, rhs, out;
  };

  static const JetContext* get(int num_vars, int order) {
    if (num_vars < 1 || num_vars > kMaxVars)
      throw JetError("jet: unsupported number of variables " + std::to_string(num_vars));
    if (order < 0 || order > kMaxOrder)
      throw JetError("jet: unsupported order " + std::to_string(order));
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<JetContext>> registry;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = registry[{num_vars, order}];
    if (!slot) slot.reset(new JetContext(num_vars, order));
    return slot.get();
  }

  int num_vars() const { return nv_; }
  int order() const { return order_; }
  std::size_t size() const { return monos_.size(); }
  const MultiIndex& multi_index(std::size_t i) const { return monos_[i]; }
  int degree(std::size_t i) const { return degrees_[i]; }
  const std::vector<Product>& products() const { return products_; }

  // Position of a multi-index, or -1 when it exceeds the truncation order.
  long index_of(const MultiIndex& a) const {
    long code = 0;
    int deg = 0;
    for (int v = kMaxVars - 1; v >= 0; --v) {
      if (a[v] < 0) return -1;
      if (v >= nv_) {
        if (a[v] != 0) return -1;
        continue;
      }
      deg += a[v];
      code = code * (order_ + 1) + a[v];
    }
    if (deg > order_) return -1;
    return lookup_[static_cast<std::size_t>(code)];
  }

 private:
  JetContext(int nv, int order) : nv_(nv), order_(order) {
    std::size_t dense = 1;
    for (int v = 0; v < nv; ++v) dense *= static_cast<std::size_t>(order + 1);
    lookup_.assign(dense, -1);
    for (int d = 0; d <= order; ++d) enumerate(MultiIndex{}, 0, d);
    for (std::size_t i = 0; i < monos_.size(); ++i) {
      long code = 0;
      for (int v = nv - 1; v >= 0; --v) code = code * (order + 1) + monos_[i][v];
      lookup_[static_cast<std::size_t>(code)] = static_cast<long>(i);
      degrees_.push_back(degree_of(monos_[i]));
    }
    for (std::size_t i = 0; i < monos_.size(); ++i) {
      for (std::size_t j = 0; j < monos_.size(); ++j) {
        if (degrees_[i] + degrees_[j] > order) continue;
        MultiIndex s{};
        for (int v = 0; v < kMaxVars; ++v) s[v] = monos_[i][v] + monos_[j][v];
        products_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                             static_cast<std::uint32_t>(index_of(s))});
      }
    }
  }

  // Lexicographic (first variable largest) enumeration of degree-d monomials.
  void enumerate(MultiIndex cur, int var, int remaining) {
    if (var == nv_ - 1) {
      cur[var] = remaining;
      monos_.push_back(cur);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      cur[var] = k;
      enumerate(cur, var + 1, remaining - k);
    }
  }

  int nv_;
  int order_;
  std::vector<MultiIndex> monos_;
  std::vector<int> degrees_;
  std::vector<long> lookup_;
  std::vector<Product> products_;
};

class Jet {
 public:
  Jet() = default;
  explicit Jet(const JetContext* ctx, double value = 0.0) : ctx_(ctx), c_(ctx->size(), 0.0) {
    c_[0] = value;
  }

  static Jet constant(const JetContext* ctx, double value) { return Jet(ctx, value); }

  static Jet variable(const JetContext* ctx, int var, double value) {
    if (var < 0 || var >= ctx->num_vars()) throw JetError("jet: variable index out of range");
    Jet r(ctx, value);
    if (ctx->order() >= 1) r.c_[1 + var] = 1.0;
    return r;
  }

  const JetContext* context() const { return ctx_; }
  double value() const { return c_[0]; }
  const std::vector<double>& coefficients() const { return c_; }
  std::vector<double>& coefficients() { return c_; }

  double coeff(const MultiIndex& a) const {
    long i = ctx_->index_of(a);
    if (i < 0) throw JetError("jet: derivative order beyond jet capacity");
    return c_[static_cast<std::size_t>(i)];
  }

  // d^alpha f at the expansion point.
  double partial(const MultiIndex& a) const { return coeff(a) * multi_factorial(a); }

  Jet& operator+=(const Jet& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    *this = *this / o;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Jet& operator/=(double s) {
    for (double& v : c_) v /= s;
    return *this;
  }

  friend Jet operator-(Jet a) {
    for (double& v : a.c_) v = -v;
    return a;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, Jet a) { return (-a) += s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a /= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check(b);
    Jet r(a.ctx_, 0.0);
    const double* x = a.c_.data();
    const double* y = b.c_.data();
    double* z = r.c_.data();
    for (const auto& p : a.ctx_->products()) z[p.out] += x[p.lhs] * y[p.rhs];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  // Sum_k coeffs[k] (a - a0)^k, the composition of a univariate Taylor
  // expansion about a0 with this jet.
  friend Jet compose(const Jet& a, const std::vector<double>& coeffs) {
    Jet h = a;
    h.c_[0] = 0.0;
    int n = std::min<int>(a.ctx_->order(), static_cast<int>(coeffs.size()) - 1);
    Jet r(a.ctx_, coeffs[static_cast<std::size_t>(n)]);
    for (int k = n - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += coeffs[static_cast<std::size_t>(k)];
    }
    return r;
  }

  friend Jet reciprocal(const Jet& a) {
    double x = a.value();
    if (x == 0.0 || !std::isfinite(x)) throw JetError("jet: reciprocal of zero");
    int n = a.ctx_->order();
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    double p = 1.0 / x;
    for (int k = 0; k <= n; ++k) {
      c[static_cast<std::size_t>(k)] = (k % 2 ? -p : p);
      p /= x;
    }
    return compose(a, c);
  }

  friend Jet exp(const Jet& a) {
    int n = a.ctx_->order();
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    double e = std::exp(a.value());
    for (int k = 0; k <= n; ++k) c[static_cast<std::size_t>(k)] = e / factorial(k);
    return compose(a, c);
  }

  friend Jet log(const Jet& a) {
    double x = a.value();
    if (!(x > 0.0)) throw JetError("jet: log of non-positive value");
    int n = a.ctx_->order();
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    c[0] = std::log(x);
    double p = 1.0;
    for (int k = 1; k <= n; ++k) {
      p /= x;
      c[static_cast<std::size_t>(k)] = (k % 2 ? p : -p) / k;
    }
    return compose(a, c);
  }

  friend Jet sin(const Jet& a) {
    int n = a.ctx_->order();
    double s = std::sin(a.value()), co = std::cos(a.value());
    const double cyc[4] = {s, co, -s, -co};
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) c[static_cast<std::size_t>(k)] = cyc[k % 4] / factorial(k);
    return compose(a, c);
  }

  friend Jet cos(const Jet& a) {
    int n = a.ctx_->order();
    double s = std::sin(a.value()), co = std::cos(a.value());
    const double cyc[4] = {co, -s, -co, s};
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) c[static_cast<std::size_t>(k)] = cyc[k % 4] / factorial(k);
    return compose(a, c);
  }

  // Integer power; negative exponents need a nonzero value.
  friend Jet pow(const Jet& a, int e) {
    double x = a.value();
    if (e < 0 && x == 0.0) throw JetError("jet: negative power of zero");
    int n = a.ctx_->order();
    std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
    double falling = 1.0;
    for (int k = 0; k <= n; ++k) {
      if (e >= 0 && k > e) break;
      c[static_cast<std::size_t>(k)] = falling * std::pow(x, e - k) / factorial(k);
      falling *= (e - k);
    }
    return compose(a, c);
  }

  friend Jet sqrt(const Jet& a) {
    double x = a.value();
    if (!(x > 0.0)) throw JetError("jet: sqrt of non-positive value");
    int n = a.ctx_->order();
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
      c[static_cast<std::size_t>(k)] = binom * std::pow(x, 0.5 - k);
      binom *= (0.5 - k) / (k + 1);
    }
    return compose(a, c);
  }

  friend Jet atan(const Jet& a) {
    double x = a.value();
    int n = a.ctx_->order();
    // 1 / (1 + (x + h)^2) as a series in h, then integrate termwise.
    std::vector<double> den = {1.0 + x * x, 2.0 * x, 1.0};
    std::vector<double> q(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 0; k < n; ++k) {
      double s = (k == 0) ? 1.0 : 0.0;
      for (int j = 1; j <= std::min(k, 2); ++j)
        s -= den[static_cast<std::size_t>(j)] * q[static_cast<std::size_t>(k - j)];
      q[static_cast<std::size_t>(k)] = s / den[0];
    }
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    c[0] = std::atan(x);
    for (int k = 1; k <= n; ++k) c[static_cast<std::size_t>(k)] = q[static_cast<std::size_t>(k - 1)] / k;
    return compose(a, c);
  }

 private:
  void check(const Jet& o) const {
    if (ctx_ != o.ctx_) throw JetError("jet: mixing jets of different contexts");
  }

  const JetContext* ctx_ = nullptr;
  std::vector<double> c_;
};

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

// Scalar overloads so templated code can call the same names on doubles.
inline double reciprocal(double x) { return 1.0 / x; }
inline double pow(double x, int e) { return std::pow(x, e); }
using std::atan;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

template <class T>
T sec(const T& x) {
  return reciprocal(cos(x));
}

template <class T>
T tan(const T& x) {
  return sin(x) / cos(x);
}

inline MultiIndex unit_index(int var, int power = 1) {
  MultiIndex a{};
  a[static_cast<std::size_t>(var)] = power;
  return a;
}

inline MultiIndex operator+(MultiIndex a, const MultiIndex& b) {
  for (int v = 0; v < kMaxVars; ++v) a[v] += b[v];
  return a;
}

// Re-express a jet in a context with more variables: source variable i
// becomes target variable var_map[i]. Terms past the target order drop.
inline Jet embed(const Jet& a, const JetContext* target, const std::vector<int>& var_map) {
  const JetContext* src = a.context();
  if (static_cast<int>(var_map.size()) != src->num_vars())
    throw JetError("jet: embed variable map size mismatch");
  Jet r(target, 0.0);
  for (std::size_t i = 0; i < src->size(); ++i) {
    const MultiIndex& m = src->multi_index(i);
    MultiIndex t{};
    for (int v = 0; v < src->num_vars(); ++v) t[static_cast<std::size_t>(var_map[v])] += m[v];
    long k = target->index_of(t);
    if (k >= 0) r.coefficients()[static_cast<std::size_t>(k)] = a.coefficients()[i];
  }
  return r;
}

// Sum_alpha c_{alpha + power e_var} x^alpha over alpha supported on the
// first target->num_vars() variables. With power 1 this is the derivative
// in `var` restricted to var = 0 (at the expansion point).
inline Jet coefficient_slice(const Jet& a, int var, int power, const JetContext* target) {
  Jet r(target, 0.0);
  for (std::size_t i = 0; i < target->size(); ++i) {
    MultiIndex m = target->multi_index(i);
    m[static_cast<std::size_t>(var)] += power;
    long k = a.context()->index_of(m);
    if (k < 0) throw JetError("jet: derivative order beyond jet capacity");
    r.coefficients()[i] = a.coefficients()[static_cast<std::size_t>(k)];
  }
  return r;
}

// Taylor coefficients s_k, k = 0..r, of s -> d^beta f(x + s e_t).
inline std::vector<double> t_series(const Jet& a, const MultiIndex& beta, int t_var, int r) {
  std::vector<double> s(static_cast<std::size_t>(r) + 1);
  for (int k = 0; k <= r; ++k) {
    MultiIndex g = beta;
    g[static_cast<std::size_t>(t_var)] += k;
    s[static_cast<std::size_t>(k)] = a.coeff(g) * multi_factorial(g) / factorial(k);
  }
  return s;
}

}  // namespace kakeya
