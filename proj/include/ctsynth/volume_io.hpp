#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "ctsynth/grid.hpp"

namespace ctsynth {

enum class DType { f32, u8 };

/// Metadata block of the CVOL container.
///
/// Layout on disk: "CVOL1\n", little-endian u64 header length N, N bytes of
/// JSON (dims, spacing_mm, dtype, order), then the raw little-endian payload.
struct VolumeHeader {
  Dims dims;
  Spacing spacing_mm{1.0, 1.0, 1.0};
  DType dtype = DType::f32;
  std::string order = "x-fastest";

  std::string to_json() const;
  static VolumeHeader from_json(const std::string& text);
  size_t payload_bytes() const;
  bool operator==(const VolumeHeader&) const = default;
};

using AnyVolume = std::variant<Volume, MaskVolume>;

std::vector<char> encode_cvol(const Volume& volume);
std::vector<char> encode_cvol(const MaskVolume& mask);
AnyVolume decode_cvol(std::span<const char> bytes);

AnyVolume read_cvol(const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);
MaskVolume read_mask(const std::filesystem::path& path);

void write_cvol(const Volume& volume, const std::filesystem::path& path);
void write_cvol(const MaskVolume& mask, const std::filesystem::path& path);

/// Uncompressed single-file NIfTI-1 (u8, i16, i32, f32). Orientation is ignored;
/// spacing comes from pixdim[1..3].
Volume read_nifti_subset(const std::filesystem::path& path);
Volume decode_nifti_subset(std::span<const char> bytes);

enum class Interp { trilinear, nearest };

/// Output dims are round(dims * spacing / target) (half away from zero, floor 1).
/// Sample positions are voxel-center aligned and clamped to the edge.
Volume resample(const Volume& volume, const Spacing& target_mm, Interp mode);
MaskVolume resample(const MaskVolume& mask, const Spacing& target_mm);

Dims resampled_dims(const Dims& dims, const Spacing& spacing, const Spacing& target_mm);

/// Out-of-bounds voxels take -1024 HU (volumes) or 0 (masks).
Volume crop(const Volume& volume, const Index3& origin, const Dims& size);
MaskVolume crop(const MaskVolume& mask, const Index3& origin, const Dims& size);

}  // namespace ctsynth
