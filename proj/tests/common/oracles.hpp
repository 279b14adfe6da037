#pragma once

// Slow, obviously-correct reference implementations shared by the unit tests
// and the acceptance binary.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <random>
#include <vector>

#include "ctsynth/grid.hpp"

namespace oracle {

using ctsynth::Dims;
using ctsynth::Index3;
using ctsynth::MaskVolume;

// Breadth-first flood fill, components numbered in scan order.
inline std::vector<uint32_t> flood_fill(const MaskVolume& m, int conn) {
  const Dims d = m.dims();
  std::vector<uint32_t> lab(m.size(), 0);
  uint32_t next = 0;
  for (size_t s = 0; s < m.size(); ++s) {
    if (!m[s] || lab[s]) continue;
    lab[s] = ++next;
    std::deque<int64_t> q{static_cast<int64_t>(s)};
    while (!q.empty()) {
      const auto c = m.coords(q.front());
      q.pop_front();
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nz = std::abs(dx) + std::abs(dy) + std::abs(dz);
            if (nz == 0 || (conn == 6 && nz > 1) || (conn == 18 && nz > 2)) continue;
            const int64_t x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
            if (x < 0 || y < 0 || z < 0 || x >= d.x || y >= d.y || z >= d.z) continue;
            const auto j = static_cast<size_t>(m.index(x, y, z));
            if (m[j] && !lab[j]) {
              lab[j] = next;
              q.push_back(static_cast<int64_t>(j));
            }
          }
    }
  }
  return lab;
}

// Squared distance from every voxel to the nearest foreground voxel, by exhaustive search.
inline std::vector<double> brute_edt_sq(const MaskVolume& m) {
  std::vector<double> out(m.size(), 1e300);
  for (size_t i = 0; i < m.size(); ++i) {
    const auto a = m.coords(static_cast<int64_t>(i));
    for (size_t j = 0; j < m.size(); ++j) {
      if (!m[j]) continue;
      const auto b = m.coords(static_cast<int64_t>(j));
      const double d2 = static_cast<double>((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                            (a[2] - b[2]) * (a[2] - b[2]));
      out[i] = std::min(out[i], d2);
    }
  }
  return out;
}

// Largest Chebyshev distance from a foreground voxel of `a` to the nearest foreground voxel of `b`.
inline int64_t max_chebyshev_gap(const MaskVolume& a, const MaskVolume& b) {
  std::vector<Index3> bs;
  for (size_t j = 0; j < b.size(); ++j)
    if (b[j]) bs.push_back(b.coords(static_cast<int64_t>(j)));
  int64_t worst = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i]) continue;
    const auto c = a.coords(static_cast<int64_t>(i));
    int64_t best = INT64_MAX;
    for (const auto& p : bs)
      best = std::min(best, std::max({std::abs(p[0] - c[0]), std::abs(p[1] - c[1]), std::abs(p[2] - c[2])}));
    worst = std::max(worst, best);
  }
  return worst;
}

inline MaskVolume box_mask(Dims d, Index3 lo, Index3 hi) {
  MaskVolume m(d, {1, 1, 1}, 0);
  for (int64_t z = lo[2]; z <= hi[2]; ++z)
    for (int64_t y = lo[1]; y <= hi[1]; ++y)
      for (int64_t x = lo[0]; x <= hi[0]; ++x) m(x, y, z) = 1;
  return m;
}

inline MaskVolume random_mask(std::mt19937_64& gen, Dims d, double p) {
  MaskVolume m(d, {1, 1, 1}, 0);
  std::bernoulli_distribution b(p);
  for (auto& v : m.data()) v = b(gen) ? 1 : 0;
  return m;
}

// Random tubes swept along two straight segments each.
inline MaskVolume random_tubes(std::mt19937_64& gen, int64_t n, int tubes) {
  MaskVolume m(Dims::cube(n), {1, 1, 1}, 0);
  std::uniform_real_distribution<double> pos(5.0, n - 6.0), rad(1.0, 2.2);
  for (int t = 0; t < tubes; ++t) {
    const double r = rad(gen);
    std::array<double, 3> a{pos(gen), pos(gen), pos(gen)};
    for (int seg = 0; seg < 2; ++seg) {
      const std::array<double, 3> b{pos(gen), pos(gen), pos(gen)};
      for (double s = 0; s <= 1.0; s += 0.01) {
        const double cx = a[0] + s * (b[0] - a[0]), cy = a[1] + s * (b[1] - a[1]), cz = a[2] + s * (b[2] - a[2]);
        for (int64_t z = static_cast<int64_t>(cz - r - 1); z <= static_cast<int64_t>(cz + r + 1); ++z)
          for (int64_t y = static_cast<int64_t>(cy - r - 1); y <= static_cast<int64_t>(cy + r + 1); ++y)
            for (int64_t x = static_cast<int64_t>(cx - r - 1); x <= static_cast<int64_t>(cx + r + 1); ++x)
              if (m.contains(x, y, z) && (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz) <= r * r)
                m(x, y, z) = 1;
      }
      a = b;
    }
  }
  return m;
}

inline bool subset(const MaskVolume& a, const MaskVolume& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace oracle
