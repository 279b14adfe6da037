#include "ctsynth/grid.hpp"

#include <algorithm>
#include <cmath>

namespace ctsynth {

std::string to_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

void require_binary(const MaskVolume& mask) {
  const auto v = mask.voxels();
  const auto it = std::find_if(v.begin(), v.end(), [](uint8_t b) { return b > 1; });
  if (it != v.end()) {
    fail(Errc::invariant_violation, "mask voxel " + std::to_string(it - v.begin()) + " has value " +
                                        std::to_string(int(*it)) + ", expected 0 or 1");
  }
}

void require_finite(const Volume& volume) {
  const auto v = volume.voxels();
  const auto it = std::find_if(v.begin(), v.end(), [](float f) { return !std::isfinite(f); });
  if (it != v.end()) {
    fail(Errc::invariant_violation, "non-finite HU at voxel " + std::to_string(it - v.begin()));
  }
}

int64_t count_foreground(const MaskVolume& mask) {
  return std::count_if(mask.voxels().begin(), mask.voxels().end(), [](uint8_t b) { return b != 0; });
}

}  // namespace ctsynth
