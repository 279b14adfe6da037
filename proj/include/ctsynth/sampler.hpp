#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsynth/grid.hpp"
#include "ctsynth/noise.hpp"
#include "ctsynth/rng.hpp"
#include "ctsynth/synth.hpp"
#include "ctsynth/transforms.hpp"

namespace ctsynth {

/// Every tunable of the patch pipeline. Serialized verbatim (same field names)
/// into shard headers and run manifests.
struct SamplerConfig {
  int64_t patch_size = 96;
  Spacing target_spacing_mm{0.5, 0.5, 0.5};
  double lesion_probability = 0.8;
  double kind_probability_calcified = 0.5;
  int64_t max_lesions_per_patch = 1;
  double lesion_threshold = 0.5;
  BlendMode blend_mode = BlendMode::soft;
  AugmentRanges augment;
  bool noise_enabled = true;
  bool noise_after_injection = true;
  NoiseParams noise;
  WindowBank windows = default_window_bank();
  uint64_t master_seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SamplerConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SamplerConfig sampler_config_from_json(const nlohmann::json& j);
/// Parse errors carry "line L, column C" of the offending byte.
SamplerConfig parse_sampler_config(const std::string& text);

/// One source grid: HU volume plus artery mask on the same grid.
struct SourceVolume {
  std::string id;
  Volume volume;
  MaskVolume artery;
};

struct PatchSample {
  MultiChannelPatch channels;
  MaskVolume target;
  nlohmann::json meta;
};

/// HU patch and ground truth just before windowing.
struct PatchDraft {
  Volume hu;
  MaskVolume target;
  nlohmann::json meta;
};

/// Artery-anchored crop, joint augmentation, lesion injection, photon noise.
/// All randomness comes from derive_rng(master_seed, source.id, index).
PatchDraft draft_patch(const SourceVolume& source, uint64_t index, const SamplerConfig& config);

/// draft_patch followed by the four-window transform.
PatchSample sample_patch(const SourceVolume& source, uint64_t index, const SamplerConfig& config);

// ---------------------------------------------------------------------------
// Shard container
//
//   "CSHD1\n" | u64 LE header length | header JSON
//   record_count x { 4*D^3 f32 LE channels | D^3 u8 target | u32 LE meta length | meta JSON }

struct ShardHeader {
  nlohmann::json config;
  uint64_t record_count = 0;
  int64_t patch_size = 0;
  std::vector<std::string> channel_order;

  nlohmann::json to_json() const;
};

std::vector<char> encode_shard_header(const ShardHeader& header);
std::vector<char> encode_shard_record(const PatchSample& sample);

struct ShardRecord {
  std::vector<float> channels;
  std::vector<uint8_t> target;
  nlohmann::json meta;
};

class ShardReader {
 public:
  explicit ShardReader(const std::filesystem::path& path);

  const ShardHeader& header() const { return header_; }
  uint64_t size() const { return header_.record_count; }
  ShardRecord read(uint64_t index);
  /// Raw bytes of record `index` exactly as stored.
  std::vector<char> read_raw(uint64_t index);

 private:
  std::filesystem::path path_;
  ShardHeader header_;
  std::vector<uint64_t> offsets_;  // record_count + 1 entries
};

struct ShardSummary {
  uint64_t records = 0;
  uint64_t calcified = 0;
  uint64_t noncalcified = 0;
  uint64_t empty_targets = 0;
  double empty_target_fraction = 0.0;
  double seconds = 0.0;
  double patches_per_second = 0.0;
  std::vector<uint64_t> positive_indices;

  nlohmann::json to_json() const;
};

/// Writes `count` samples, record i drawn from sources[i % sources.size()]
/// at index i. Workers may finish out of order; records are written in index
/// order so the file bytes do not depend on `workers`.
ShardSummary generate_shard(const std::vector<SourceVolume>& sources, uint64_t count, const SamplerConfig& config,
                            const std::filesystem::path& path, unsigned workers = 1);

/// Pairs a volume with its artery mask, resampling both to the configured
/// target spacing when they differ from it (HU trilinear, mask nearest).
SourceVolume make_source(std::string id, Volume volume, MaskVolume artery, const SamplerConfig& config);

/// Loads every <id>_vol.cvol / <id>_mask.cvol pair in dir, sorted by id and
/// resampled for config. Unpaired files are an io error naming each orphan.
std::vector<SourceVolume> load_sources(const std::filesystem::path& dir, const SamplerConfig& config,
                                       std::vector<std::filesystem::path>* files_read = nullptr);

/// Record i of a shard over these sources.
PatchSample sample_from_sources(const std::vector<SourceVolume>& sources, uint64_t index, const SamplerConfig& config);

}  // namespace ctsynth
