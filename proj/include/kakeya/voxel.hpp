#pragma once

// delta-cube voxel sets [i d, (i+1) d) x [j d, (j+1) d) x [k d, (k+1) d).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kakeya/common.hpp"

namespace kakeya {

struct Cell {
  int i = 0, j = 0, k = 0;
};

inline constexpr std::int64_t kCellOffset = 1 << 20;

inline std::uint64_t pack_cell(int i, int j, int k) {
  if (std::abs(i) >= kCellOffset || std::abs(j) >= kCellOffset || std::abs(k) >= kCellOffset)
    throw DomainError("voxel: cell index out of range");
  return (static_cast<std::uint64_t>(i + kCellOffset) << 42) | (static_cast<std::uint64_t>(j + kCellOffset) << 21) |
         static_cast<std::uint64_t>(k + kCellOffset);
}

inline Cell unpack_cell(std::uint64_t key) {
  const std::uint64_t mask = (1ULL << 21) - 1;
  return {static_cast<int>(static_cast<std::int64_t>((key >> 42) & mask) - kCellOffset),
          static_cast<int>(static_cast<std::int64_t>((key >> 21) & mask) - kCellOffset),
          static_cast<int>(static_cast<std::int64_t>(key & mask) - kCellOffset)};
}

inline std::uint64_t cell_of(double x, double y, double t, double delta) {
  return pack_cell(static_cast<int>(std::floor(x / delta)), static_cast<int>(std::floor(y / delta)),
                   static_cast<int>(std::floor(t / delta)));
}

inline Vec3d cell_center(std::uint64_t key, double delta) {
  Cell c = unpack_cell(key);
  return {(c.i + 0.5) * delta, (c.j + 0.5) * delta, (c.k + 0.5) * delta};
}

struct VoxelSet {
  double delta = 0.0;
  std::vector<std::uint64_t> keys;  // sorted, unique

  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
  double measure() const { return static_cast<double>(keys.size()) * delta * delta * delta; }
  bool contains(std::uint64_t key) const { return std::binary_search(keys.begin(), keys.end(), key); }

  void normalize() {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  }

  static VoxelSet from_keys(double delta, std::vector<std::uint64_t> k) {
    VoxelSet v{delta, std::move(k)};
    v.normalize();
    return v;
  }
};

inline VoxelSet set_union(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet r{a.delta, {}};
  r.keys.reserve(a.size() + b.size());
  std::set_union(a.keys.begin(), a.keys.end(), b.keys.begin(), b.keys.end(), std::back_inserter(r.keys));
  return r;
}

inline VoxelSet set_intersection(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet r{a.delta, {}};
  std::set_intersection(a.keys.begin(), a.keys.end(), b.keys.begin(), b.keys.end(), std::back_inserter(r.keys));
  return r;
}

inline VoxelSet dilate(const VoxelSet& s) {
  std::vector<std::uint64_t> out;
  out.reserve(s.size() * 27);
  for (auto key : s.keys) {
    Cell c = unpack_cell(key);
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int d = -1; d <= 1; ++d) out.push_back(pack_cell(c.i + a, c.j + b, c.k + d));
  }
  return VoxelSet::from_keys(s.delta, std::move(out));
}

// Measure of the union of a collection of shadings.
inline double union_measure(const std::vector<VoxelSet>& sets) {
  if (sets.empty()) return 0.0;
  std::vector<std::uint64_t> all;
  std::size_t n = 0;
  for (const auto& s : sets) n += s.size();
  all.reserve(n);
  for (const auto& s : sets) all.insert(all.end(), s.keys.begin(), s.keys.end());
  return VoxelSet::from_keys(sets.front().delta, std::move(all)).measure();
}

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> log_points;  // (log2 delta, log2 value)
};

// OLS fit of log value against log delta.
inline ExponentFit exponent_fit(const std::vector<std::pair<double, double>>& delta_value) {
  if (delta_value.size() < 3) throw DomainError("exponent fit: need at least 3 scales");
  ExponentFit f;
  double sx = 0, sy = 0;
  for (auto [d, v] : delta_value) {
    if (!(d > 0) || !(v > 0)) throw DomainError("exponent fit: non-positive data");
    f.log_points.push_back({std::log2(d), std::log2(v)});
  }
  double n = static_cast<double>(f.log_points.size());
  for (auto [x, y] : f.log_points) sx += x, sy += y;
  double mx = sx / n, my = sy / n, sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : f.log_points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) throw DomainError("exponent fit: degenerate scales");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (auto [x, y] : f.log_points) {
    double e = y - (f.intercept + f.slope * x);
    sse += e * e;
  }
  f.stderr_slope = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return f;
}

}  // namespace kakeya
