#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctsynth/grid.hpp"
#include "ctsynth/rng.hpp"

namespace ctsynth {

enum class LesionKind { calcified, noncalcified };

std::string to_string(LesionKind kind);
LesionKind lesion_kind_from_string(const std::string& s);

struct HuRange {
  double lo;
  double hi;
};

/// Phenotype attenuation: calcified 800-1500 HU, soft plaque 30-90 HU.
HuRange lesion_hu_range(LesionKind kind);

struct Blob {
  std::array<double, 3> center{0.0, 0.0, 0.0};  // voxels, relative to the first blob
  double sigma = 1.0;                           // voxels
  double weight = 1.0;
};

struct LesionSpec {
  LesionKind kind = LesionKind::calcified;
  std::vector<Blob> blobs;
  double target_hu = 1000.0;
  double threshold = 0.5;

  double max_sigma() const;
  void validate() const;
};

nlohmann::json to_json(const LesionSpec& spec);
LesionSpec lesion_spec_from_json(const nlohmann::json& j);

inline constexpr double kSigmaMin = 0.7;
inline constexpr double kSigmaMax = 2.0;

/// Blob count uniform in {1,2,3}; sigma uniform in [0.7, 2.0]; blob k > 0 is
/// offset per axis by U(-1.5, 1.5) * sigma of a uniformly chosen earlier blob;
/// weights U(0.5, 1.0); target HU uniform in the phenotype range.
LesionSpec sample_lesion_spec(Rng& rng, LesionKind kind, double threshold = 0.5);

/// Rasterized lesion on an integer bounding box.
///
/// `origin` is the bbox corner in the lesion's local voxel frame; `peak` is the
/// argmax of the field (lowest linear index on ties), which is always a mask
/// voxel and is the point that gets anchored onto an artery voxel.
struct LesionStamp {
  Index3 origin{0, 0, 0};
  Dims dims;
  std::vector<double> field;
  std::vector<uint8_t> mask;
  double field_max = 0.0;
  double threshold = 0.5;
  Index3 peak{0, 0, 0};  // bbox-local
  int64_t anchor_radius = 0;

  int64_t index(int64_t x, int64_t y, int64_t z) const { return x + dims.x * (y + dims.y * z); }
  int64_t voxel_count() const;
  /// Partial-volume blend weight in [0,1]; 0 at the mask rim, 1 at the peak.
  double blend_weight(size_t i) const;
};

/// f(v) = sum_i w_i exp(-|v - c_i|^2 / (2 sigma_i^2)) on a box extending
/// 3 * max sigma past every blob center; mask = f >= threshold * f_max.
///
/// Throws Errc::synthesis when the mask is empty, not 26-connected, or reaches
/// beyond `anchor_radius` = ceil(3 * max sigma) (Chebyshev) of the peak voxel.
LesionStamp rasterize_lesion(const LesionSpec& spec);

/// Draws specs until one rasterizes cleanly (at most 1 + `max_retries` draws).
struct Lesion {
  LesionSpec spec;
  LesionStamp stamp;
};
Lesion synthesize_lesion(Rng& rng, LesionKind kind, double threshold = 0.5, int max_retries = 10);

enum class BlendMode { soft, hard };

struct InjectResult {
  Index3 anchor;  // patch voxel that received the stamp peak
  int64_t lesion_voxels = 0;
};

/// Places the stamp peak on a uniformly chosen artery voxel and blends
/// target HU into `patch` in place; ORs the clipped stamp mask into
/// `lesion_mask`. Soft mode: HU = (1 - s) HU + s target, s the stamp blend
/// weight. Hard mode replaces every mask voxel with the target.
InjectResult inject_lesion(Volume& patch, const MaskVolume& artery_mask, const LesionStamp& stamp,
                           double target_hu, Rng& rng, MaskVolume& lesion_mask, BlendMode mode = BlendMode::soft);

}  // namespace ctsynth
