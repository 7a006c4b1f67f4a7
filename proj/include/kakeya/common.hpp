#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace kakeya {

template <class T>
using Vec2 = std::array<T, 2>;
using Vec2d = Vec2<double>;
using Vec3d = std::array<double, 3>;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double norm2(const Vec2d& v) { return std::hypot(v[0], v[1]); }
inline double det2(const Vec2d& a, const Vec2d& b) { return a[0] * b[1] - a[1] * b[0]; }
inline double dot2(const Vec2d& a, const Vec2d& b) { return a[0] * b[0] + a[1] * b[1]; }
inline Vec2d perp(const Vec2d& v) { return {-v[1], v[0]}; }

inline double log2_inv(double delta) { return std::log2(1.0 / delta); }

}  // namespace kakeya
