#pragma once

#include <array>
#include <string>
#include <vector>

#include "ctsynth/grid.hpp"
#include "ctsynth/rng.hpp"
#include "ctsynth/volume_io.hpp"

namespace ctsynth {

struct WindowSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

/// Channel order is fixed: fat, soft tissue, angiographic, calcification.
using WindowBank = std::array<WindowSpec, 4>;

WindowBank default_window_bank();
void validate_window_bank(const WindowBank& bank);

/// clamp((x - lo) / (hi - lo), 0, 1)
inline double apply_window(double x_hu, const WindowSpec& w) {
  const double t = (x_hu - w.lo) / (w.hi - w.lo);
  return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
}

/// Four windowed copies of a patch, channel-major (4 x D^3), each in [0,1].
struct MultiChannelPatch {
  Dims dims;
  std::vector<float> channels;

  std::span<const float> channel(int k) const {
    const auto n = static_cast<size_t>(dims.count());
    return std::span<const float>(channels).subspan(static_cast<size_t>(k) * n, n);
  }
};

MultiChannelPatch apply_window_bank(const Volume& patch, const WindowBank& bank);

struct AugmentParams {
  std::array<double, 3> rotation_deg{0.0, 0.0, 0.0};
  double zoom = 1.0;
  std::array<bool, 3> flips{false, false, false};

  bool is_identity() const;
};

struct AugmentRanges {
  double rotation_max_deg = 15.0;
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double flip_probability = 0.5;
};

AugmentParams sample_augment(Rng& rng, const AugmentRanges& ranges);

struct AugmentedPair {
  Volume hu;
  MaskVolume mask;
};

/// Rotation about the central voxel floor(D/2) (x, then y, then z), isotropic
/// zoom about the same voxel, then per-axis mirror flips (i -> D-1-i). HU is
/// trilinear with -1024 fill, mask is nearest with 0 fill. The central voxel
/// is a fixed point of rotation and zoom, so an anchored artery voxel survives.
AugmentedPair augment(const Volume& patch, const MaskVolume& mask, const AugmentParams& params);

}  // namespace ctsynth
