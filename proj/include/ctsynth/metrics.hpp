#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctsynth/grid.hpp"

namespace ctsynth {

struct SegScores {
  double dice = 0.0;
  double cldice = 0.0;
  double msd_voxels = 0.0;  // NaN when either mask is empty
};

/// 2|a n b| / (|a| + |b|); 1 when both are empty.
double dice(const MaskVolume& a, const MaskVolume& b);

enum class Connectivity { c6 = 6, c18 = 18, c26 = 26 };

struct ComponentLabels {
  Dims dims;
  std::vector<uint32_t> labels;  // 0 = background, 1..count
  uint32_t count = 0;
  std::vector<int64_t> sizes;    // sizes[k] = voxels with label k + 1
};

/// Two-pass union-find labeling. Labels are numbered in order of each
/// component's smallest linear voxel index.
ComponentLabels connected_components(const MaskVolume& mask, Connectivity conn = Connectivity::c26);

struct LesionMatch {
  uint32_t pred = 0;  // component label in the prediction
  uint32_t gt = 0;    // component label in the reference
  int64_t overlap = 0;
};

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  uint32_t n_pred = 0;
  uint32_t n_gt = 0;
  std::vector<LesionMatch> matched_pairs;
};

/// Lesion-level scoring: components on both masks, candidate pairs whose
/// overlap is strictly greater than `min_overlap`, greedy one-to-one matching
/// by descending overlap (ties by gt label then pred label).
DetectionScores match_lesions(const MaskVolume& pred, const MaskVolume& gt, int64_t min_overlap = 10);

/// Topology-preserving thinning to 1-voxel-wide curves (26/6 connectivity).
MaskVolume skeletonize3d(const MaskVolume& mask);

/// True when deleting the center of the 3x3x3 neighbourhood `n` (index
/// x + 3y + 9z, center 13) keeps one 26-connected foreground component and one
/// 6-connected background component in the neighbourhood.
bool is_simple_point(const std::array<uint8_t, 27>& n);

/// Centerline Dice: harmonic mean of |S(pred) n gt| / |S(pred)| and
/// |S(gt) n pred| / |S(gt)|. Both empty -> 1, exactly one empty -> 0.
double cldice(const MaskVolume& pred, const MaskVolume& gt);

/// Exact squared Euclidean distance (voxel units) to the nearest foreground
/// voxel, separable lower-envelope transform.
Grid<double> edt_sq(const MaskVolume& mask);

/// Foreground voxels with at least one background 6-neighbour (outside the
/// grid counts as background).
MaskVolume surface_voxels(const MaskVolume& mask);

/// Symmetric mean surface distance in voxels.
double msd(const MaskVolume& pred, const MaskVolume& gt);

SegScores score_segmentation(const MaskVolume& pred, const MaskVolume& gt);

/// Mann-Whitney AUROC: (concordant + 0.5 ties) / (n_pos n_neg).
double auroc(std::span<const double> scores, std::span<const uint8_t> labels);

struct RocResult {
  double auc = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_resamples = 0;
};

/// Percentile bootstrap (2.5 / 97.5, linearly interpolated). A resample that
/// draws a single class is redrawn, at most 10 times per slot.
RocResult bootstrap_auc_ci(std::span<const double> scores, std::span<const uint8_t> labels, int n_resamples,
                           uint64_t seed);

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

}  // namespace ctsynth
