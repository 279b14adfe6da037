#pragma once

#include <cstdint>

#include "ctsynth/grid.hpp"

namespace ctsynth {

struct PhantomConfig {
  Dims dims{128, 128, 128};
  Spacing spacing_mm{0.5, 0.5, 0.5};
  uint64_t seed = 0;
  int n_vessels = 3;
  double radius_min = 1.5;  // voxels
  double radius_max = 3.0;
  double lumen_hu_min = 350.0;
  double lumen_hu_max = 450.0;
  double fat_hu = -80.0;
  double soft_tissue_hu = 40.0;
  double myocardium_hu = 45.0;
  double texture_amplitude_hu = 15.0;

  void validate() const;
};

struct Phantom {
  Volume volume;
  MaskVolume artery;
};

/// Fat surround, soft-tissue body, a myocardium-like shell, and `n_vessels`
/// tubes swept along Catmull-Rom smoothed random walks. Smooth texture is
/// added to non-artery voxels only, so lumen HU stays inside its range.
Phantom generate_phantom(const PhantomConfig& config);

}  // namespace ctsynth
