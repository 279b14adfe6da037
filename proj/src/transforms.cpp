#include "ctsynth/transforms.hpp"

#include <cmath>
#include <numbers>

namespace ctsynth {

WindowBank default_window_bank() {
  return {{
      {"fat", -100.0, 140.0},
      {"soft_tissue", 50.0, 400.0},
      {"angiographic", 350.0, 700.0},
      {"calcification", 500.0, 2000.0},
  }};
}

void validate_window_bank(const WindowBank& bank) {
  for (const auto& w : bank) {
    if (!(w.hi > w.lo) || !std::isfinite(w.lo) || !std::isfinite(w.hi)) {
      fail(Errc::invalid_argument, "window '" + w.name + "' needs hi > lo");
    }
  }
}

MultiChannelPatch apply_window_bank(const Volume& patch, const WindowBank& bank) {
  MultiChannelPatch out;
  out.dims = patch.dims();
  const size_t n = patch.size();
  out.channels.resize(4 * n);
  for (int k = 0; k < 4; ++k) {
    const WindowSpec& w = bank[k];
    float* dst = out.channels.data() + static_cast<size_t>(k) * n;
    const auto src = patch.voxels();
    for (size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(apply_window(src[i], w));
  }
  return out;
}

bool AugmentParams::is_identity() const {
  return rotation_deg[0] == 0.0 && rotation_deg[1] == 0.0 && rotation_deg[2] == 0.0 && zoom == 1.0 &&
         !flips[0] && !flips[1] && !flips[2];
}

AugmentParams sample_augment(Rng& rng, const AugmentRanges& r) {
  AugmentParams p;
  for (auto& a : p.rotation_deg) a = rng.uniform(-r.rotation_max_deg, r.rotation_max_deg);
  p.zoom = rng.uniform(r.zoom_min, r.zoom_max);
  for (auto& f : p.flips) f = rng.bernoulli(r.flip_probability);
  return p;
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 rotation(int axis, double deg) {
  const double t = deg * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  switch (axis) {
    case 0: return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
    case 1: return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
    default: return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
  }
}

template <typename T>
Grid<T> flip_only(const Grid<T>& src, const std::array<bool, 3>& flips) {
  Grid<T> out(src.dims(), src.spacing());
  const Dims& d = src.dims();
  for (int64_t z = 0; z < d.z; ++z) {
    const int64_t sz = flips[2] ? d.z - 1 - z : z;
    for (int64_t y = 0; y < d.y; ++y) {
      const int64_t sy = flips[1] ? d.y - 1 - y : y;
      for (int64_t x = 0; x < d.x; ++x) out(x, y, z) = src(flips[0] ? d.x - 1 - x : x, sy, sz);
    }
  }
  return out;
}

}  // namespace

AugmentedPair augment(const Volume& patch, const MaskVolume& mask, const AugmentParams& params) {
  require_same_dims(patch, mask, "augment");
  if (params.rotation_deg[0] == 0.0 && params.rotation_deg[1] == 0.0 && params.rotation_deg[2] == 0.0 &&
      params.zoom == 1.0) {
    return {flip_only(patch, params.flips), flip_only(mask, params.flips)};
  }
  if (!(params.zoom > 0.0)) fail(Errc::invalid_argument, "zoom must be positive");

  // Forward: p = flip(c + zoom * Rz Ry Rx (q - c)), c the central voxel
  // floor(D/2), flip mirroring i -> D-1-i. Pulled back as q = inv * p + t.
  const Mat3 r = mul(rotation(2, params.rotation_deg[2]), mul(rotation(1, params.rotation_deg[1]),
                                                              rotation(0, params.rotation_deg[0])));
  const Dims& d = patch.dims();
  const std::array<double, 3> c{static_cast<double>(d.x / 2), static_cast<double>(d.y / 2),
                                static_cast<double>(d.z / 2)};
  std::array<double, 3> unflip_offset{};
  for (int j = 0; j < 3; ++j) unflip_offset[j] = params.flips[j] ? static_cast<double>(d[j] - 1) : 0.0;
  Mat3 inv{};
  std::array<double, 3> t{};
  for (int i = 0; i < 3; ++i) {
    t[i] = c[i];
    for (int j = 0; j < 3; ++j) {
      const double rt = r[j][i] / params.zoom;  // (R^T / zoom)[i][j]
      inv[i][j] = rt * (params.flips[j] ? -1.0 : 1.0);
      t[i] += rt * (unflip_offset[j] - c[j]);
    }
  }

  Volume hu(d, patch.spacing(), kAirHu);
  MaskVolume m(d, mask.spacing(), 0);

  auto hu_at = [&](int64_t x, int64_t y, int64_t z) -> double {
    return patch.contains(x, y, z) ? static_cast<double>(patch(x, y, z)) : static_cast<double>(kAirHu);
  };

  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      const auto dy = static_cast<double>(y), dz = static_cast<double>(z);
      std::array<double, 3> q0;
      for (int i = 0; i < 3; ++i) q0[i] = t[i] + inv[i][1] * dy + inv[i][2] * dz;
      for (int64_t x = 0; x < d.x; ++x) {
        const auto dx = static_cast<double>(x);
        const double qx = q0[0] + inv[0][0] * dx;
        const double qy = q0[1] + inv[1][0] * dx;
        const double qz = q0[2] + inv[2][0] * dx;

        const auto nx = static_cast<int64_t>(std::floor(qx + 0.5));
        const auto ny = static_cast<int64_t>(std::floor(qy + 0.5));
        const auto nz = static_cast<int64_t>(std::floor(qz + 0.5));
        if (mask.contains(nx, ny, nz)) m(x, y, z) = mask(nx, ny, nz);

        const double fx = std::floor(qx), fy = std::floor(qy), fz = std::floor(qz);
        const auto ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy), iz = static_cast<int64_t>(fz);
        if (ix < -1 || iy < -1 || iz < -1 || ix >= d.x || iy >= d.y || iz >= d.z) continue;
        const double wx = qx - fx, wy = qy - fy, wz = qz - fz;
        double acc;
        if (ix >= 0 && iy >= 0 && iz >= 0 && ix + 1 < d.x && iy + 1 < d.y && iz + 1 < d.z) {
          const float* p = &patch(ix, iy, iz);
          const int64_t sy = d.x, sz = d.x * d.y;
          const double c00 = p[0] + (p[1] - p[0]) * wx;
          const double c10 = p[sy] + (p[sy + 1] - p[sy]) * wx;
          const double c01 = p[sz] + (p[sz + 1] - p[sz]) * wx;
          const double c11 = p[sz + sy] + (p[sz + sy + 1] - p[sz + sy]) * wx;
          const double c0 = c00 + (c10 - c00) * wy;
          const double c1 = c01 + (c11 - c01) * wy;
          acc = c0 + (c1 - c0) * wz;
        } else {
          auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
          const double c00 = lerp(hu_at(ix, iy, iz), hu_at(ix + 1, iy, iz), wx);
          const double c10 = lerp(hu_at(ix, iy + 1, iz), hu_at(ix + 1, iy + 1, iz), wx);
          const double c01 = lerp(hu_at(ix, iy, iz + 1), hu_at(ix + 1, iy, iz + 1), wx);
          const double c11 = lerp(hu_at(ix, iy + 1, iz + 1), hu_at(ix + 1, iy + 1, iz + 1), wx);
          acc = lerp(lerp(c00, c10, wy), lerp(c01, c11, wy), wz);
        }
        hu(x, y, z) = static_cast<float>(acc);
      }
    }
  }
  return {std::move(hu), std::move(m)};
}

}  // namespace ctsynth
