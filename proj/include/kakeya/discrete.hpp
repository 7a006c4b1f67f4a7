#pragma once

// delta-discretized curve machinery: shadings, direction-separated samples,
// ball condition, regular and two-ends refinements, broad-narrow descent,
// multiplicity dichotomy, bushes, hairbrushes and prism decompositions.
// |log delta| means log2(1/delta) throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kakeya/classifier.hpp"
#include "kakeya/families.hpp"
#include "kakeya/parallel.hpp"
#include "kakeya/rng.hpp"
#include "kakeya/voxel.hpp"

namespace kakeya {

class NarrowDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double abs_log(double delta) { return log2_inv(delta); }

enum class ShadeMode { Dilated, Centerline };

using CurvePath = std::function<Vec2d(double)>;

// Cells met by t -> (x(t), t). Samples at t-step delta / (4 max(1, 1.5 speed));
// Dilated adds the 26 neighbours of every sampled cell.
inline VoxelSet shade_path(const CurvePath& x, const std::vector<Interval>& tdom, double delta,
                           ShadeMode mode = ShadeMode::Dilated) {
  if (!(delta > 0.0)) throw DomainError("shade: delta must be positive");
  std::vector<std::uint64_t> keys;
  bool any = false;
  for (const auto& iv : tdom) {
    if (!(iv.hi >= iv.lo)) continue;
    any = true;
    double speed = 0.0;
    if (iv.length() > 0.0) {
      const int pre = 64;
      Vec2d prev = x(iv.lo);
      for (int i = 1; i <= pre; ++i) {
        double t = iv.lo + iv.length() * i / pre;
        Vec2d c = x(t);
        speed = std::max(speed, std::hypot(c[0] - prev[0], c[1] - prev[1]) / (iv.length() / pre));
        prev = c;
      }
    }
    double step = delta / (4.0 * std::max(1.0, 1.5 * speed));
    int n = std::max(1, static_cast<int>(std::ceil(iv.length() / step)));
    for (int i = 0; i <= n; ++i) {
      double t = iv.lo + iv.length() * i / n;
      Vec2d c = x(t);
      keys.push_back(cell_of(c[0], c[1], t, delta));
    }
  }
  if (!any) throw DomainError("shade: empty t-domain");
  VoxelSet s = VoxelSet::from_keys(delta, std::move(keys));
  return mode == ShadeMode::Dilated ? dilate(s) : s;
}

inline double lambda_density(const VoxelSet& s) { return s.measure() / (s.delta * s.delta); }

struct PhaseCurve {
  Vec2d xi{0.0, 0.0};
  Vec2d v{0.0, 0.0};
};

inline Vec2d phase_gradient(const PhaseFunction& ph, double t, const Vec2d& xi) {
  if (ph.model) {
    Eigen::Vector2d g = ph.model->at(t) * Eigen::Vector2d(xi[0], xi[1]);
    return {g(0), g(1)};
  }
  return ph.grad(t, xi[0], xi[1]);
}

inline Vec2d phase_curve_point(const PhaseFunction& ph, const PhaseCurve& c, double t) {
  Vec2d g = phase_gradient(ph, t, c.xi);
  return {c.v[0] - g[0], c.v[1] - g[1]};
}

struct CurveSet {
  PhaseFunction phase;
  std::vector<PhaseCurve> curves;
  double delta = 0.0;
  Interval t_range{0.0, 1.0};
  bool direction_separated = false;

  std::size_t size() const { return curves.size(); }
  CurvePath path(std::size_t i) const {
    const PhaseFunction* ph = &phase;
    PhaseCurve c = curves[i];
    return [ph, c](double t) { return phase_curve_point(*ph, c, t); };
  }
  std::vector<Vec2d> directions() const {
    std::vector<Vec2d> out;
    out.reserve(curves.size());
    for (const auto& c : curves) out.push_back(c.xi);
    return out;
  }
};

enum class VRule { Fixed, Random, Witness };

struct SampleOptions {
  double fraction = 1.0;
  VRule v_rule = VRule::Fixed;
  Vec2d v_fixed{0.0, 0.0};
  double v_radius = 0.5;
  Eigen::Matrix2d omega = Eigen::Matrix2d::Zero();
  std::uint64_t seed = 0;
  Interval t_range{0.0, 1.0};
  std::size_t max_curves = 100000;
  double min_delta = 0x1.0p-9;
};

// Directions on the cell-centred grid of [-R, R]^2 with spacing 2R / floor(2R / delta) >= delta.
inline CurveSet direction_separated_sample(const PhaseFunction& ph, double delta, const SampleOptions& o = {}) {
  if (!(delta > 0.0)) throw DomainError("sample: delta must be positive");
  if (delta < o.min_delta) throw DomainError("sample: delta below the configured ceiling");
  double R = ph.xi_radius;
  int n = std::max(1, static_cast<int>(std::floor(2.0 * R / delta + 1e-9)));
  double h = 2.0 * R / n;
  CounterRng rng(o.seed, "direction-sample");
  CurveSet L;
  L.phase = ph;
  L.delta = delta;
  L.t_range = o.t_range;
  L.direction_separated = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::uint64_t idx = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(j);
      if (o.fraction < 1.0 && rng.uniform(idx, 0) >= o.fraction) continue;
      PhaseCurve c;
      c.xi = {-R + (i + 0.5) * h, -R + (j + 0.5) * h};
      switch (o.v_rule) {
        case VRule::Fixed:
          c.v = o.v_fixed;
          break;
        case VRule::Random:
          c.v = {rng.uniform(idx, 1, -o.v_radius, o.v_radius), rng.uniform(idx, 2, -o.v_radius, o.v_radius)};
          break;
        case VRule::Witness: {
          Eigen::Vector2d v = o.omega * Eigen::Vector2d(c.xi[0], c.xi[1]);
          c.v = {v(0), v(1)};
          break;
        }
      }
      L.curves.push_back(c);
      if (L.curves.size() > o.max_curves) throw DomainError("sample: curve count exceeds the configured ceiling");
    }
  return L;
}

inline std::vector<VoxelSet> shade_all(const CurveSet& L, ShadeMode mode = ShadeMode::Dilated, int workers = 1) {
  std::vector<Interval> dom{L.t_range};
  return parallel_map<VoxelSet>(L.size(), workers,
                                [&](std::size_t i) { return shade_path(L.path(i), dom, L.delta, mode); });
}

// cell -> sorted list of curves whose shading contains it (CSR layout).
struct IncidenceIndex {
  std::vector<std::uint64_t> keys;
  std::vector<std::size_t> offsets;  // size keys.size() + 1
  std::vector<int> curves;

  std::size_t find(std::uint64_t key) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), key);
    if (it == keys.end() || *it != key) return keys.size();
    return static_cast<std::size_t>(it - keys.begin());
  }
  std::size_t multiplicity(std::uint64_t key) const {
    std::size_t i = find(key);
    return i == keys.size() ? 0 : offsets[i + 1] - offsets[i];
  }
  std::size_t max_multiplicity() const {
    std::size_t m = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) m = std::max(m, offsets[i + 1] - offsets[i]);
    return m;
  }
};

inline IncidenceIndex build_incidence(const std::vector<VoxelSet>& Y) {
  std::vector<std::pair<std::uint64_t, int>> pairs;
  std::size_t n = 0;
  for (const auto& y : Y) n += y.size();
  pairs.reserve(n);
  for (std::size_t c = 0; c < Y.size(); ++c)
    for (auto k : Y[c].keys) pairs.push_back({k, static_cast<int>(c)});
  std::sort(pairs.begin(), pairs.end());
  IncidenceIndex idx;
  idx.offsets.push_back(0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (idx.keys.empty() || idx.keys.back() != pairs[i].first) {
      if (!idx.keys.empty()) idx.offsets.push_back(i);
      idx.keys.push_back(pairs[i].first);
    }
    idx.curves.push_back(pairs[i].second);
  }
  if (!idx.keys.empty()) idx.offsets.push_back(pairs.size());
  return idx;
}

struct BallCheck {
  bool holds = true;
  double worst_ratio = 0.0;
  Vec3d worst_center{0, 0, 0};
  double worst_radius = 0.0;
  std::size_t worst_count = 0;
};

// max over dyadic r in [delta, 1] and open balls B(q, r), q a sample point,
// of #(L cap B) / (r / delta)^2; holds iff the max is <= C.
inline BallCheck ball_condition_check(const std::vector<Vec3d>& pts, double delta, double C = 4.0) {
  BallCheck out;
  if (pts.empty()) return out;
  std::vector<Vec3d> s = pts;
  std::sort(s.begin(), s.end());
  for (double r = delta; r <= 1.0 + 1e-12; r *= 2.0) {
    std::size_t lo = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      while (s[lo][0] <= s[i][0] - r) ++lo;
      std::size_t cnt = 0;
      for (std::size_t j = lo; j < s.size() && s[j][0] < s[i][0] + r; ++j) {
        double d = std::sqrt((s[j][0] - s[i][0]) * (s[j][0] - s[i][0]) + (s[j][1] - s[i][1]) * (s[j][1] - s[i][1]) +
                             (s[j][2] - s[i][2]) * (s[j][2] - s[i][2]));
        if (d < r) ++cnt;
      }
      double ratio = static_cast<double>(cnt) / ((r / delta) * (r / delta));
      if (ratio > out.worst_ratio) {
        out.worst_ratio = ratio;
        out.worst_center = s[i];
        out.worst_radius = r;
        out.worst_count = cnt;
      }
    }
  }
  out.holds = out.worst_ratio <= C;
  return out;
}

// Dyadic blocks of the t-index range of a shading, normalized to unit length:
// level j splits [kmin, kmin + K) into 2^j blocks of K / 2^j cells, K a power of two.
struct DyadicFrame {
  int kmin = 0;
  int levels = 0;  // log2 K

  int block(int k, int j) const { return (k - kmin) >> (levels - j); }
};

inline DyadicFrame dyadic_frame(const VoxelSet& Y) {
  DyadicFrame f;
  if (Y.empty()) return f;
  int kmin = std::numeric_limits<int>::max(), kmax = std::numeric_limits<int>::min();
  for (auto key : Y.keys) {
    int k = unpack_cell(key).k;
    kmin = std::min(kmin, k);
    kmax = std::max(kmax, k);
  }
  f.kmin = kmin;
  while ((1 << f.levels) < kmax - kmin + 1) ++f.levels;
  return f;
}

// Worst value of |Y cap I| / (|I| |Y| / (C |log delta|)) over nonempty dyadic blocks;
// the shading is regular iff this is >= 1.
inline double regularity_margin(const VoxelSet& Y, double C_reg, const DyadicFrame& f) {
  if (Y.empty()) return 0.0;
  double L = std::max(1.0, abs_log(Y.delta));
  double N = static_cast<double>(Y.size());
  double worst = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= f.levels; ++j) {
    std::map<int, std::size_t> cnt;
    for (auto key : Y.keys) ++cnt[f.block(unpack_cell(key).k, j)];
    double need = std::ldexp(1.0, -j) * N / (C_reg * L);
    for (auto& [b, c] : cnt) worst = std::min(worst, static_cast<double>(c) / need);
  }
  return worst;
}

inline double regularity_margin(const VoxelSet& Y, double C_reg) {
  return regularity_margin(Y, C_reg, dyadic_frame(Y));
}

struct RegularRefinement {
  VoxelSet cells;
  double retained_fraction = 1.0;
  int passes = 0;
};

// Deletes dyadic blocks with |Y cap I| < |I| |Y| / (C |log delta|) until none remain.
inline RegularRefinement regular_refinement(const VoxelSet& Y, double C_reg = 4.0) {
  if (Y.empty()) throw DomainError("regular refinement: empty shading");
  DyadicFrame f = dyadic_frame(Y);
  double L = std::max(1.0, abs_log(Y.delta));
  RegularRefinement out;
  out.cells = Y;
  for (;;) {
    double N = static_cast<double>(out.cells.size());
    std::vector<std::pair<int, int>> bad;  // (level, block)
    for (int j = 0; j <= f.levels; ++j) {
      std::map<int, std::size_t> cnt;
      for (auto key : out.cells.keys) ++cnt[f.block(unpack_cell(key).k, j)];
      double need = std::ldexp(1.0, -j) * N / (C_reg * L);
      for (auto& [b, c] : cnt)
        if (static_cast<double>(c) < need) bad.push_back({j, b});
    }
    if (bad.empty()) break;
    ++out.passes;
    std::vector<std::uint64_t> keep;
    for (auto key : out.cells.keys) {
      int k = unpack_cell(key).k;
      bool drop = false;
      for (auto [j, b] : bad)
        if (f.block(k, j) == b) {
          drop = true;
          break;
        }
      if (!drop) keep.push_back(key);
    }
    out.cells.keys = std::move(keep);
    if (out.cells.empty()) throw DomainError("regular refinement: shading emptied, C_reg too small");
  }
  out.retained_fraction = static_cast<double>(out.cells.size()) / static_cast<double>(Y.size());
  return out;
}

inline double center_distance(const Vec3d& a, const Vec3d& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

inline std::vector<double> dyadic_radii(const VoxelSet& Y) {
  std::vector<Vec3d> c;
  for (auto k : Y.keys) c.push_back(cell_center(k, Y.delta));
  double lo[3], hi[3];
  for (int a = 0; a < 3; ++a) lo[a] = std::numeric_limits<double>::infinity(), hi[a] = -lo[a];
  for (const auto& p : c)
    for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], p[static_cast<std::size_t>(a)]), hi[a] = std::max(hi[a], p[static_cast<std::size_t>(a)]);
  double diam = std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                          (hi[2] - lo[2]) * (hi[2] - lo[2]));
  std::vector<double> r;
  for (double x = Y.delta;; x *= 2.0) {
    r.push_back(x);
    if (x >= diam) break;
  }
  return r;
}

// counts[i][j] = #{cells within distance radii[j] of cell i} (closed balls at cell centres).
inline std::vector<std::vector<std::size_t>> ball_counts(const VoxelSet& Y, const std::vector<double>& radii,
                                                          const VoxelSet& centers) {
  std::vector<Vec3d> pts;
  for (auto k : Y.keys) pts.push_back(cell_center(k, Y.delta));
  std::vector<std::vector<std::size_t>> out;
  std::vector<double> d(pts.size());
  for (auto kc : centers.keys) {
    Vec3d c = cell_center(kc, centers.delta);
    for (std::size_t i = 0; i < pts.size(); ++i) d[i] = center_distance(c, pts[i]);
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> row;
    for (double r : radii)
      row.push_back(static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), r * (1.0 + 1e-12)) - d.begin()));
    out.push_back(std::move(row));
  }
  return out;
}

struct TwoEndsPiece {
  Vec3d center{0, 0, 0};
  double radius = 0.0;
  VoxelSet cells;
  double score = 0.0;  // r^-eps0 |Y cap B(x, r)|
};

// Maximizes r^-eps0 |Y cap B(x, r)| over dyadic r and cell-centred balls.
inline TwoEndsPiece two_ends_piece(const VoxelSet& Y, double eps0) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw DomainError("two ends: eps0 must lie in (0, 1)");
  if (Y.empty()) throw DomainError("two ends: empty shading");
  auto radii = dyadic_radii(Y);
  auto counts = ball_counts(Y, radii, Y);
  TwoEndsPiece best;
  best.score = -1.0;
  std::size_t bi = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < radii.size(); ++j) {
      double s = std::pow(radii[j], -eps0) * static_cast<double>(counts[i][j]);
      if (s > best.score * (1.0 + 1e-12)) {
        best.score = s;
        best.radius = radii[j];
        bi = i;
      }
    }
  best.center = cell_center(Y.keys[bi], Y.delta);
  std::vector<std::uint64_t> keep;
  for (auto k : Y.keys)
    if (center_distance(cell_center(k, Y.delta), best.center) <= best.radius * (1.0 + 1e-12)) keep.push_back(k);
  best.cells = VoxelSet::from_keys(Y.delta, std::move(keep));
  return best;
}

// max over cells x' of Y' and dyadic r' of |Y' cap B(x', r')| / ((r' / r)^eps0 |Y'|).
inline double two_ends_violation(const VoxelSet& Yp, double r, double eps0) {
  auto radii = dyadic_radii(Yp);
  auto counts = ball_counts(Yp, radii, Yp);
  double worst = 0.0, n = static_cast<double>(Yp.size());
  for (const auto& row : counts)
    for (std::size_t j = 0; j < radii.size(); ++j)
      worst = std::max(worst, static_cast<double>(row[j]) / (std::pow(radii[j] / r, eps0) * n));
  return worst;
}

struct BroadNarrowResult {
  Interval J;
  double r = 0.0;
  int level = 0;
  int children = 0;                       // M
  std::array<std::vector<int>, 3> subsets;  // indices into the input
  std::size_t count_J = 0;
  std::size_t count_total = 0;
  int n_levels = 0;             // ceil(|log delta| / log2 |log delta|)
  double guarantee = 0.0;       // 100^-n
  double split_fraction = 0.0;  // (2 |log delta|)^-1
};

// Descent through M-adic subintervals of omega0, M = max(5, ceil|log delta|). Stops at the
// first level with three pairwise non-adjacent children each holding >= (2|log delta|)^-1
// of the current mass; otherwise enters the heaviest child.
inline BroadNarrowResult broad_narrow(const std::vector<double>& thetas, double delta, double eps = 0.1,
                                      Interval omega0 = {-1.0, 1.0}) {
  double L = std::max(1.0, abs_log(delta));
  double need = std::max(2.0, std::pow(delta, -eps));
  if (static_cast<double>(thetas.size()) < need) throw DomainError("broad-narrow: too few curves through x");
  BroadNarrowResult out;
  out.children = std::max(5, static_cast<int>(std::ceil(L)));
  out.count_total = thetas.size();
  out.n_levels = static_cast<int>(std::ceil(L / std::max(1.0, std::log2(L))));
  out.guarantee = std::pow(100.0, -out.n_levels);
  out.split_fraction = 1.0 / (2.0 * L);
  const int M = out.children;
  std::vector<int> cur;
  for (std::size_t i = 0; i < thetas.size(); ++i)
    if (omega0.contains(thetas[i])) cur.push_back(static_cast<int>(i));
  Interval J = omega0;
  for (int level = 0;; ++level) {
    if (J.length() < delta) throw NarrowDegenerate("broad-narrow: mass never splits above scale delta");
    std::vector<std::vector<int>> kids(static_cast<std::size_t>(M));
    for (int i : cur) {
      int c = static_cast<int>(std::floor((thetas[static_cast<std::size_t>(i)] - J.lo) / J.length() * M));
      kids[static_cast<std::size_t>(std::clamp(c, 0, M - 1))].push_back(i);
    }
    double thr = static_cast<double>(cur.size()) * out.split_fraction;
    int ba = -1, bb = -1, bc = -1;
    std::size_t best_min = 0;
    for (int a = 0; a < M; ++a)
      for (int b = a + 2; b < M; ++b)
        for (int c = b + 2; c < M; ++c) {
          std::size_t m = std::min({kids[static_cast<std::size_t>(a)].size(), kids[static_cast<std::size_t>(b)].size(),
                                    kids[static_cast<std::size_t>(c)].size()});
          if (static_cast<double>(m) >= thr && m > best_min) {
            best_min = m;
            ba = a, bb = b, bc = c;
          }
        }
    if (ba >= 0) {
      out.J = J;
      out.r = J.length();
      out.level = level;
      out.count_J = cur.size();
      out.subsets = {kids[static_cast<std::size_t>(ba)], kids[static_cast<std::size_t>(bb)],
                     kids[static_cast<std::size_t>(bc)]};
      return out;
    }
    std::size_t h = 0;
    for (std::size_t c = 1; c < kids.size(); ++c)
      if (kids[c].size() > kids[h].size()) h = c;
    double w = J.length() / M;
    J = {J.lo + w * static_cast<double>(h), J.lo + w * static_cast<double>(h + 1)};
    cur = kids[h];
  }
}

struct DichotomyResult {
  int mu = 0;
  double sigma = 0.0;
  bool case_I = false;
  bool case_II = false;
  std::vector<int> high;  // L'
  std::size_t heavy_curves = 0;  // curves with >= |Y|/2 cells of multiplicity >= mu
  double C = 8.0;
};

// Smallest mu satisfying Case I (binary search), then the dyadic sigma maximizing #L'.
inline DichotomyResult multiplicity_dichotomy(const std::vector<VoxelSet>& Y, const std::vector<Vec2d>& xi,
                                              double delta, double C = 8.0) {
  if (Y.size() != xi.size()) throw DomainError("dichotomy: shading/direction size mismatch");
  DichotomyResult out;
  out.C = C;
  if (Y.empty()) return out;
  IncidenceIndex idx = build_incidence(Y);
  std::vector<std::vector<std::size_t>> slot(Y.size());
  for (std::size_t c = 0; c < Y.size(); ++c)
    for (auto k : Y[c].keys) slot[c].push_back(idx.find(k));
  auto mult = [&](std::size_t s) { return static_cast<int>(idx.offsets[s + 1] - idx.offsets[s]); };
  auto case_I = [&](int mu) {
    std::size_t good = 0;
    for (std::size_t c = 0; c < Y.size(); ++c) {
      std::size_t low = 0;
      for (auto s : slot[c])
        if (mult(s) <= mu) ++low;
      if (2 * low >= Y[c].size()) ++good;
    }
    return 2 * good >= Y.size();
  };
  int lo = 1, hi = static_cast<int>(idx.max_multiplicity());
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (case_I(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  out.mu = lo;
  out.case_I = case_I(lo);
  for (std::size_t c = 0; c < Y.size(); ++c) {
    std::size_t high = 0;
    for (auto s : slot[c])
      if (mult(s) >= out.mu) ++high;
    if (2 * high >= Y[c].size()) ++out.heavy_curves;
  }
  double L = std::max(1.0, abs_log(delta));
  double thr_n = static_cast<double>(out.mu) / (C * L);
  const int B = static_cast<int>(std::ceil(std::log2(8.0 / delta))) + 1;
  std::vector<std::vector<std::size_t>> cnt(Y.size(), std::vector<std::size_t>(static_cast<std::size_t>(B), 0));
  std::vector<std::size_t> hist(static_cast<std::size_t>(B));
  for (std::size_t c = 0; c < Y.size(); ++c)
    for (auto s : slot[c]) {
      if (static_cast<double>(mult(s)) < thr_n || mult(s) < 2) continue;
      std::fill(hist.begin(), hist.end(), 0);
      for (std::size_t q = idx.offsets[s]; q < idx.offsets[s + 1]; ++q) {
        auto o = static_cast<std::size_t>(idx.curves[q]);
        if (o == c) continue;
        double d = std::hypot(xi[o][0] - xi[c][0], xi[o][1] - xi[c][1]);
        if (d < delta * (1.0 - 1e-9)) continue;
        int b = static_cast<int>(std::floor(std::log2(d / delta) + 1e-12));
        ++hist[static_cast<std::size_t>(std::clamp(b, 0, B - 1))];
      }
      for (int b = 0; b < B; ++b)
        if (hist[static_cast<std::size_t>(b)] > 0 && static_cast<double>(hist[static_cast<std::size_t>(b)]) >= thr_n)
          ++cnt[c][static_cast<std::size_t>(b)];
    }
  std::size_t best = 0;
  int bbest = 0;
  for (int b = 0; b < B; ++b) {
    std::size_t n = 0;
    for (std::size_t c = 0; c < Y.size(); ++c)
      if (static_cast<double>(cnt[c][static_cast<std::size_t>(b)]) >= static_cast<double>(Y[c].size()) / (C * L) &&
          cnt[c][static_cast<std::size_t>(b)] > 0)
        ++n;
    if (n > best) best = n, bbest = b;
  }
  out.sigma = delta * std::ldexp(1.0, bbest);
  for (std::size_t c = 0; c < Y.size(); ++c)
    if (static_cast<double>(cnt[c][static_cast<std::size_t>(bbest)]) >= static_cast<double>(Y[c].size()) / (C * L) &&
        cnt[c][static_cast<std::size_t>(bbest)] > 0)
      out.high.push_back(static_cast<int>(c));
  out.case_II = static_cast<double>(out.high.size()) >= static_cast<double>(Y.size()) / (C * L);
  return out;
}

struct Bush {
  std::uint64_t cell = 0;
  Vec3d center{0, 0, 0};
  std::vector<int> members;
};

// Curves whose shading contains the (first) cell of maximal multiplicity.
inline Bush extract_bush(const IncidenceIndex& idx, double delta) {
  std::size_t best = idx.keys.size(), m = 0;
  for (std::size_t i = 0; i < idx.keys.size(); ++i) {
    std::size_t mi = idx.offsets[i + 1] - idx.offsets[i];
    if (mi > m) m = mi, best = i;
  }
  if (m <= 1) throw DomainError("bush: no cell exceeds multiplicity 1");
  Bush b;
  b.cell = idx.keys[best];
  b.center = cell_center(b.cell, delta);
  b.members.assign(idx.curves.begin() + static_cast<std::ptrdiff_t>(idx.offsets[best]),
                   idx.curves.begin() + static_cast<std::ptrdiff_t>(idx.offsets[best + 1]));
  return b;
}

struct Hairbrush {
  int stem = -1;
  std::vector<int> members;
  std::vector<std::uint64_t> certificate;  // a shared cell per member
};

// Curves meeting Y(stem) with sigma <= |xi - xi_stem| < 2 sigma.
inline Hairbrush extract_hairbrush(const std::vector<VoxelSet>& Y, const std::vector<Vec2d>& xi,
                                   const IncidenceIndex& idx, int stem, double sigma) {
  if (Y.empty()) throw DomainError("hairbrush: empty curve set");
  if (stem < 0 || static_cast<std::size_t>(stem) >= Y.size()) throw DomainError("hairbrush: stem out of range");
  Hairbrush h;
  h.stem = stem;
  std::map<int, std::uint64_t> found;
  const Vec2d& x0 = xi[static_cast<std::size_t>(stem)];
  for (auto k : Y[static_cast<std::size_t>(stem)].keys) {
    std::size_t s = idx.find(k);
    if (s == idx.keys.size()) continue;
    for (std::size_t q = idx.offsets[s]; q < idx.offsets[s + 1]; ++q) {
      int o = idx.curves[q];
      if (o == stem || found.count(o)) continue;
      double d = std::hypot(xi[static_cast<std::size_t>(o)][0] - x0[0], xi[static_cast<std::size_t>(o)][1] - x0[1]);
      if (d >= sigma * (1.0 - 1e-12) && d < 2.0 * sigma) found[o] = k;
    }
  }
  for (auto& [o, k] : found) {
    h.members.push_back(o);
    h.certificate.push_back(k);
  }
  return h;
}

struct BushDisjointness {
  bool disjoint = true;
  std::size_t overlapping_cells = 0;
  std::size_t curves = 0;
  double min_direction_gap = 0.0;
};

// Curves of the phase through x = (x1, x2, t) with the given directions, shaded at
// scale sigma; T(l) = cells with centre outside B(x, sigma / eps).
inline BushDisjointness bush_disjointness(const PhaseFunction& ph, const Vec3d& x, const std::vector<Vec2d>& xis,
                                          double sigma, double eps, Interval t_range) {
  BushDisjointness out;
  out.curves = xis.size();
  out.min_direction_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xis.size(); ++i)
    for (std::size_t j = i + 1; j < xis.size(); ++j)
      out.min_direction_gap =
          std::min(out.min_direction_gap, std::hypot(xis[i][0] - xis[j][0], xis[i][1] - xis[j][1]));
  std::vector<VoxelSet> T;
  for (const auto& xi : xis) {
    Vec2d g = phase_gradient(ph, x[2], xi);
    PhaseCurve c{xi, {x[0] + g[0], x[1] + g[1]}};
    VoxelSet Y = shade_path([&](double t) { return phase_curve_point(ph, c, t); }, {t_range}, sigma);
    std::vector<std::uint64_t> keep;
    for (auto k : Y.keys)
      if (center_distance(cell_center(k, sigma), x) > sigma / eps) keep.push_back(k);
    T.push_back(VoxelSet::from_keys(sigma, std::move(keep)));
  }
  IncidenceIndex idx = build_incidence(T);
  for (std::size_t i = 0; i < idx.keys.size(); ++i)
    if (idx.offsets[i + 1] - idx.offsets[i] > 1) ++out.overlapping_cells;
  out.disjoint = out.overlapping_cells == 0;
  return out;
}

struct PrismIndex {
  long a = 0;  // t-tile
  long b = 0;  // thin-direction tile
  bool operator==(const PrismIndex& o) const { return a == o.a && b == o.b; }
};

// Tiling of the projected strip B^1 x [-rho, rho] by translates of [-d, d] x [-delta, delta],
// d = sqrt(delta / r), centred at (2 d a, 2 delta b). P^0 = tiles with b = 0.
struct PrismDecomposition {
  GrainProjection proj;
  Vec3d p{0, 0, 0};
  double rho = 0.0, delta = 0.0, r = 0.0, d = 0.0;

  Vec2d project(const Vec2d& x, double t) const { return proj(x, t); }

  PrismIndex index_of(const Vec2d& x, double t) const {
    Vec2d q = proj(x, t);
    return {std::lround(q[0] / (2.0 * d)), std::lround(q[1] / (2.0 * delta))};
  }
  bool in_P0(const Vec2d& x, double t) const { return index_of(x, t).b == 0; }

  std::vector<PrismIndex> tiles(Interval t_range) const {
    std::vector<PrismIndex> out;
    long a0 = std::lround(t_range.lo / (2.0 * d)), a1 = std::lround(t_range.hi / (2.0 * d));
    long bmax = std::lround(rho / (2.0 * delta));
    for (long a = a0; a <= a1; ++a)
      for (long b = -bmax; b <= bmax; ++b) out.push_back({a, b});
    return out;
  }
};

inline PrismDecomposition prism_decomposition(const CurveFamily& F, const Vec3d& p, double rho, double delta,
                                              double r) {
  if (!(delta > 0.0) || !(r > 0.0)) throw DomainError("prisms: delta and r must be positive");
  double hi = std::min(std::sqrt(delta * r), delta / r);
  if (rho < delta * (1.0 - 1e-12) || rho > hi * (1.0 + 1e-12)) throw DomainError("prisms: rho out of range");
  PrismDecomposition P{GrainProjection{&F, p[0], p[1], p[2]}, p, rho, delta, r, std::sqrt(delta / r)};
  return P;
}

// Samples the prism (a, b) of Q (points X + y gamma_perp + s gamma_hat over the tile, |s| <= rho)
// and returns the largest thin-direction distance, under the projection of P, from the
// slab of half-width delta around the image of the tile centre.
inline double prism_compatibility_distance(const PrismDecomposition& P, const PrismDecomposition& Q, PrismIndex tile,
                                           int samples = 5) {
  const CurveFamily& F = *Q.proj.F;
  double tc = 2.0 * Q.d * static_cast<double>(tile.a), yc = 2.0 * Q.delta * static_cast<double>(tile.b);
  auto point = [&](double t, double y, double s) {
    Vec2d base = F(Q.p[0], Q.p[1], Q.p[2], t);
    Vec2d n = Q.proj.gamma_perp(t);
    Vec2d g{n[1], -n[0]};
    return Vec2d{base[0] + y * n[0] + s * g[0], base[1] + y * n[1] + s * g[1]};
  };
  double ref = P.project(point(tc, yc, 0.0), tc)[1];
  double worst = 0.0;
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j)
      for (int k = 0; k < samples; ++k) {
        double u = samples > 1 ? 2.0 * i / (samples - 1) - 1.0 : 0.0;
        double v = samples > 1 ? 2.0 * j / (samples - 1) - 1.0 : 0.0;
        double w = samples > 1 ? 2.0 * k / (samples - 1) - 1.0 : 0.0;
        double t = tc + u * Q.d, y = yc + v * Q.delta, s = w * Q.rho;
        double yp = P.project(point(t, y, s), t)[1];
        worst = std::max(worst, std::max(0.0, std::abs(yp - ref) - P.delta));
      }
  return worst;
}

}  // namespace kakeya
