#include "ctsynth/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctsynth/rng.hpp"

namespace ctsynth {

void PhantomConfig::validate() const {
  if (dims.x < 64 || dims.y < 64 || dims.z < 64) fail(Errc::invalid_argument, "phantom dims must be >= 64 per axis");
  if (!(radius_min > 0.0 && radius_min <= radius_max)) fail(Errc::invalid_argument, "phantom radii need 0 < min <= max");
  if (n_vessels < 1) fail(Errc::invalid_argument, "phantom needs at least one vessel");
  if (!(lumen_hu_min <= lumen_hu_max)) fail(Errc::invalid_argument, "lumen HU range is inverted");
  for (double s : spacing_mm) {
    if (!(s > 0.0)) fail(Errc::invalid_argument, "phantom spacing must be positive");
  }
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
  Vec3 r{};
  const double t2 = t * t, t3 = t2 * t;
  for (int a = 0; a < 3; ++a) {
    r[a] = 0.5 * ((2 * p1[a]) + (-p0[a] + p2[a]) * t + (2 * p0[a] - 5 * p1[a] + 4 * p2[a] - p3[a]) * t2 +
                  (-p0[a] + 3 * p1[a] - 3 * p2[a] + p3[a]) * t3);
  }
  return r;
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

}  // namespace

Phantom generate_phantom(const PhantomConfig& cfg) {
  cfg.validate();
  Rng rng = derive_rng(cfg.seed, "phantom", 0);
  const Dims& d = cfg.dims;
  Phantom ph{Volume(d, cfg.spacing_mm, static_cast<float>(cfg.fat_hu)), MaskVolume(d, cfg.spacing_mm, 0)};

  // Tissue layout: fat outside a body ellipsoid, soft tissue inside, and a
  // myocardium-like ellipsoidal shell around the center.
  const Vec3 c{d.x / 2.0, d.y / 2.0, d.z / 2.0};
  for (int64_t z = 0; z < d.z; ++z)
    for (int64_t y = 0; y < d.y; ++y)
      for (int64_t x = 0; x < d.x; ++x) {
        const double ex = (x - c[0]) / d.x, ey = (y - c[1]) / d.y, ez = (z - c[2]) / d.z;
        const double r2 = ex * ex + ey * ey + ez * ez;
        float hu = static_cast<float>(cfg.fat_hu);
        if (r2 < 0.45 * 0.45) hu = static_cast<float>(cfg.soft_tissue_hu);
        if (r2 < 0.25 * 0.25 && r2 > 0.17 * 0.17) hu = static_cast<float>(cfg.myocardium_hu);
        ph.volume(x, y, z) = hu;
      }

  // Low-amplitude smooth texture: three plane waves, periods 16-48 voxels.
  struct Wave {
    Vec3 k;
    double phase;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    const double len = std::max(norm(dir), 1e-9);
    const double period = rng.uniform(16.0, 48.0);
    for (int a = 0; a < 3; ++a) w.k[a] = 2.0 * std::numbers::pi * dir[a] / (len * period);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  // Vessels.
  const double margin = cfg.radius_max + 2.0;
  auto clamp_point = [&](Vec3 p) {
    for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a], margin, static_cast<double>(d[a]) - 1.0 - margin);
    return p;
  };
  const double step = static_cast<double>(std::min({d.x, d.y, d.z})) / 8.0;
  constexpr int kControl = 6;
  for (int v = 0; v < cfg.n_vessels; ++v) {
    const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
    const auto lumen = static_cast<float>(rng.uniform(cfg.lumen_hu_min, cfg.lumen_hu_max));
    std::vector<Vec3> pts;
    Vec3 p{};
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(margin, static_cast<double>(d[a]) - 1.0 - margin);
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    pts.push_back(p);
    for (int k = 1; k < kControl; ++k) {
      for (auto& x : dir) x += 0.6 * rng.normal();
      const double len = std::max(norm(dir), 1e-9);
      for (int a = 0; a < 3; ++a) {
        dir[a] /= len;
        p[a] += step * dir[a];
        // reflect at the margins so the walk stays inside
        const double hi = static_cast<double>(d[a]) - 1.0 - margin;
        if (p[a] < margin) {
          p[a] = 2 * margin - p[a];
          dir[a] = -dir[a];
        }
        if (p[a] > hi) {
          p[a] = 2 * hi - p[a];
          dir[a] = -dir[a];
        }
      }
      pts.push_back(clamp_point(p));
    }

    const auto r_box = static_cast<int64_t>(std::ceil(radius));
    const double r2 = radius * radius;
    for (int s = 0; s + 1 < kControl; ++s) {
      const Vec3& p0 = pts[std::max(s - 1, 0)];
      const Vec3& p1 = pts[s];
      const Vec3& p2 = pts[s + 1];
      const Vec3& p3 = pts[std::min(s + 2, kControl - 1)];
      const Vec3 diff{p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]};
      const int samples = std::max(1, static_cast<int>(std::ceil(norm(diff) / 0.25)));
      for (int i = 0; i <= samples; ++i) {
        const Vec3 q = clamp_point(catmull_rom(p0, p1, p2, p3, static_cast<double>(i) / samples));
        const auto qx = static_cast<int64_t>(std::lround(q[0]));
        const auto qy = static_cast<int64_t>(std::lround(q[1]));
        const auto qz = static_cast<int64_t>(std::lround(q[2]));
        for (int64_t z = qz - r_box - 1; z <= qz + r_box + 1; ++z)
          for (int64_t y = qy - r_box - 1; y <= qy + r_box + 1; ++y)
            for (int64_t x = qx - r_box - 1; x <= qx + r_box + 1; ++x) {
              if (!ph.artery.contains(x, y, z)) continue;
              const double dx = x - q[0], dy = y - q[1], dz = z - q[2];
              if (dx * dx + dy * dy + dz * dz > r2) continue;
              ph.artery(x, y, z) = 1;
              ph.volume(x, y, z) = lumen;
            }
      }
    }
  }

  for (int64_t z = 0; z < d.z; ++z)
    for (int64_t y = 0; y < d.y; ++y)
      for (int64_t x = 0; x < d.x; ++x) {
        if (ph.artery(x, y, z)) continue;
        double t = 0.0;
        for (const auto& w : waves) t += std::sin(w.k[0] * x + w.k[1] * y + w.k[2] * z + w.phase);
        ph.volume(x, y, z) += static_cast<float>(cfg.texture_amplitude_hu * t / 3.0);
      }
  return ph;
}

}  // namespace ctsynth
