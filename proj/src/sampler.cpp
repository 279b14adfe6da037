#include "ctsynth/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "bytes.hpp"
#include "ctsynth/volume_io.hpp"

namespace ctsynth {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void SamplerConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(Errc::invalid_argument, std::string(name) + " must be in [0, 1]");
  };
  if (patch_size < 16) fail(Errc::invalid_argument, "patch_size must be >= 16");
  for (double s : target_spacing_mm) {
    if (!(s > 0.0)) fail(Errc::invalid_argument, "target_spacing_mm must be positive");
  }
  prob(lesion_probability, "lesion_probability");
  prob(kind_probability_calcified, "kind_probability_calcified");
  prob(augment.flip_probability, "flip_probability");
  if (max_lesions_per_patch < 1) fail(Errc::invalid_argument, "max_lesions_per_patch must be >= 1");
  if (!(lesion_threshold > 0.0 && lesion_threshold < 1.0)) {
    fail(Errc::invalid_argument, "lesion_threshold must be in (0, 1)");
  }
  if (!(augment.rotation_max_deg >= 0.0)) fail(Errc::invalid_argument, "rotation_max_deg must be >= 0");
  if (!(augment.zoom_min > 0.0 && augment.zoom_min <= augment.zoom_max)) {
    fail(Errc::invalid_argument, "zoom_range must satisfy 0 < min <= max");
  }
  noise.validate();
  validate_window_bank(windows);
}

json to_json(const SamplerConfig& c) {
  json windows = json::array();
  for (const auto& w : c.windows) windows.push_back({{"name", w.name}, {"lo", w.lo}, {"hi", w.hi}});
  return {
      {"patch_size", c.patch_size},
      {"target_spacing_mm", c.target_spacing_mm},
      {"lesion_probability", c.lesion_probability},
      {"kind_probability_calcified", c.kind_probability_calcified},
      {"max_lesions_per_patch", c.max_lesions_per_patch},
      {"lesion_threshold", c.lesion_threshold},
      {"blend_mode", c.blend_mode == BlendMode::soft ? "soft" : "hard"},
      {"rotation_max_deg", c.augment.rotation_max_deg},
      {"zoom_range", {c.augment.zoom_min, c.augment.zoom_max}},
      {"flip_probability", c.augment.flip_probability},
      {"noise_enabled", c.noise_enabled},
      {"noise_after_injection", c.noise_after_injection},
      {"noise",
       {{"i0", c.noise.i0},
        {"path_mm", c.noise.path_mm},
        {"sigma_e", c.noise.sigma_e},
        {"mu_water_per_mm", c.noise.mu_water_per_mm}}},
      {"windows", windows},
      {"master_seed", c.master_seed},
  };
}

namespace {

template <typename T>
T field(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    fail(Errc::invalid_argument, "config key '" + key + "' has the wrong type");
  }
}

}  // namespace

SamplerConfig sampler_config_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "config must be a JSON object");
  SamplerConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "patch_size") {
      c.patch_size = field<int64_t>(value, key);
    } else if (key == "target_spacing_mm") {
      c.target_spacing_mm = field<Spacing>(value, key);
    } else if (key == "lesion_probability") {
      c.lesion_probability = field<double>(value, key);
    } else if (key == "kind_probability_calcified") {
      c.kind_probability_calcified = field<double>(value, key);
    } else if (key == "max_lesions_per_patch") {
      c.max_lesions_per_patch = field<int64_t>(value, key);
    } else if (key == "lesion_threshold") {
      c.lesion_threshold = field<double>(value, key);
    } else if (key == "blend_mode") {
      const auto mode = field<std::string>(value, key);
      if (mode == "soft") {
        c.blend_mode = BlendMode::soft;
      } else if (mode == "hard") {
        c.blend_mode = BlendMode::hard;
      } else {
        fail(Errc::invalid_argument, "blend_mode must be \"soft\" or \"hard\"");
      }
    } else if (key == "rotation_max_deg") {
      c.augment.rotation_max_deg = field<double>(value, key);
    } else if (key == "zoom_range") {
      const auto z = field<std::array<double, 2>>(value, key);
      c.augment.zoom_min = z[0];
      c.augment.zoom_max = z[1];
    } else if (key == "flip_probability") {
      c.augment.flip_probability = field<double>(value, key);
    } else if (key == "noise_enabled") {
      c.noise_enabled = field<bool>(value, key);
    } else if (key == "noise_after_injection") {
      c.noise_after_injection = field<bool>(value, key);
    } else if (key == "noise") {
      if (!value.is_object()) fail(Errc::invalid_argument, "config key 'noise' must be an object");
      for (const auto& [nk, nv] : value.items()) {
        if (nk == "i0") {
          c.noise.i0 = field<double>(nv, "noise.i0");
        } else if (nk == "path_mm") {
          c.noise.path_mm = field<double>(nv, "noise.path_mm");
        } else if (nk == "sigma_e") {
          c.noise.sigma_e = field<double>(nv, "noise.sigma_e");
        } else if (nk == "mu_water_per_mm") {
          c.noise.mu_water_per_mm = field<double>(nv, "noise.mu_water_per_mm");
        } else {
          fail(Errc::invalid_argument, "unknown config key 'noise." + nk + "'");
        }
      }
    } else if (key == "windows") {
      if (!value.is_array() || value.size() != 4) fail(Errc::invalid_argument, "windows must list exactly 4 windows");
      for (size_t k = 0; k < 4; ++k) {
        const auto& w = value[k];
        if (!w.is_object()) fail(Errc::invalid_argument, "window entries must be objects");
        for (const auto& [wk, wv] : w.items()) {
          if (wk == "name") {
            c.windows[k].name = field<std::string>(wv, "windows.name");
          } else if (wk == "lo") {
            c.windows[k].lo = field<double>(wv, "windows.lo");
          } else if (wk == "hi") {
            c.windows[k].hi = field<double>(wv, "windows.hi");
          } else {
            fail(Errc::invalid_argument, "unknown config key 'windows." + wk + "'");
          }
        }
      }
    } else if (key == "master_seed") {
      c.master_seed = field<uint64_t>(value, key);
    } else {
      fail(Errc::invalid_argument, "unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

SamplerConfig parse_sampler_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, col = 1;
    const size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(Errc::invalid_argument,
         "config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  return sampler_config_from_json(j);
}

SourceVolume make_source(std::string id, Volume volume, MaskVolume artery, const SamplerConfig& config) {
  require_same_dims(volume, artery, "make_source");
  if (volume.spacing() != config.target_spacing_mm) {
    volume = resample(volume, config.target_spacing_mm, Interp::trilinear);
  }
  if (artery.spacing() != config.target_spacing_mm) artery = resample(artery, config.target_spacing_mm);
  return {std::move(id), std::move(volume), std::move(artery)};
}

std::vector<SourceVolume> load_sources(const std::filesystem::path& dir, const SamplerConfig& config,
                                       std::vector<std::filesystem::path>* files_read) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(Errc::io, "not a directory: " + dir.string());
  std::map<std::string, fs::path> vols, masks;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    for (auto [suffix, table] : {std::pair{std::string_view("_vol.cvol"), &vols}, {"_mask.cvol", &masks}}) {
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        (*table)[name.substr(0, name.size() - suffix.size())] = entry.path();
        break;
      }
    }
  }
  std::vector<std::string> orphans;
  for (const auto& [id, p] : vols)
    if (!masks.count(id)) orphans.push_back(p.filename().string());
  for (const auto& [id, p] : masks)
    if (!vols.count(id)) orphans.push_back(p.filename().string());
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    std::string msg = "unmatched volume/mask files in " + dir.string() + ":";
    for (const auto& o : orphans) msg += "\n  " + o;
    fail(Errc::io, msg);
  }
  std::vector<SourceVolume> sources;
  for (const auto& [id, vol_path] : vols) {
    const auto& mask_path = masks.at(id);
    sources.push_back(make_source(id, read_volume(vol_path), read_mask(mask_path), config));
    if (files_read) {
      files_read->push_back(vol_path);
      files_read->push_back(mask_path);
    }
  }
  return sources;
}

PatchSample sample_from_sources(const std::vector<SourceVolume>& sources, uint64_t index, const SamplerConfig& config) {
  if (sources.empty()) fail(Errc::invalid_argument, "no source volumes");
  return sample_patch(sources[index % sources.size()], index, config);
}

// ---------------------------------------------------------------------------
// Pipeline

PatchDraft draft_patch(const SourceVolume& source, uint64_t index, const SamplerConfig& config) {
  require_same_dims(source.volume, source.artery, "sample_patch");
  Rng rng = derive_rng(config.master_seed, source.id, index);

  // (1) anchor uniformly among artery voxels
  const int64_t n_artery = count_foreground(source.artery);
  if (n_artery == 0) fail(Errc::placement, "artery mask of '" + source.id + "' is empty");
  uint64_t pick = rng.below(static_cast<uint64_t>(n_artery));
  int64_t anchor_linear = -1;
  const auto av = source.artery.voxels();
  for (size_t i = 0; i < av.size(); ++i) {
    if (av[i] && pick-- == 0) {
      anchor_linear = static_cast<int64_t>(i);
      break;
    }
  }
  const Index3 anchor = source.volume.coords(anchor_linear);

  // (2) crop centered on the anchor; the anchor lands on voxel D/2
  const int64_t d = config.patch_size;
  const Index3 origin{anchor[0] - d / 2, anchor[1] - d / 2, anchor[2] - d / 2};
  Volume hu = crop(source.volume, origin, Dims::cube(d));
  MaskVolume artery = crop(source.artery, origin, Dims::cube(d));

  // (3) joint augmentation
  const AugmentParams aug = sample_augment(rng, config.augment);
  if (!aug.is_identity()) {
    auto pair = augment(hu, artery, aug);
    hu = std::move(pair.hu);
    artery = std::move(pair.mask);
  }

  MaskVolume target(hu.dims(), hu.spacing(), 0);
  json lesions = json::array();
  std::optional<LesionKind> kind;

  const bool noise_first = config.noise_enabled && !config.noise_after_injection;
  // The noise stream is forked up front so toggling noise order never shifts
  // the lesion draws.
  Rng noise_rng = rng.fork(0x6E6F697365ULL);
  if (noise_first) apply_ct_noise_inplace(hu, config.noise, noise_rng);

  // (4) lesion injection
  if (rng.bernoulli(config.lesion_probability)) {
    kind = rng.bernoulli(config.kind_probability_calcified) ? LesionKind::calcified : LesionKind::noncalcified;
    const auto n = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(config.max_lesions_per_patch)));
    for (int64_t k = 0; k < n; ++k) {
      Lesion lesion = synthesize_lesion(rng, *kind, config.lesion_threshold);
      const InjectResult placed =
          inject_lesion(hu, artery, lesion.stamp, lesion.spec.target_hu, rng, target, config.blend_mode);
      json rec = to_json(lesion.spec);
      rec["anchor_patch_voxel"] = placed.anchor;
      rec["new_voxels"] = placed.lesion_voxels;
      rec["placement"] = "independent-artery-voxel";
      lesions.push_back(std::move(rec));
    }
  }

  // (5) photon noise
  if (config.noise_enabled && config.noise_after_injection) apply_ct_noise_inplace(hu, config.noise, noise_rng);

  json meta = {
      {"volume_id", source.id},
      {"index", index},
      {"anchor_voxel", anchor},
      {"lesion_kind", kind ? json(to_string(*kind)) : json(nullptr)},
      {"lesions", lesions},
      {"target_voxels", count_foreground(target)},
      {"augment",
       {{"rotation_deg", aug.rotation_deg}, {"zoom", aug.zoom}, {"flips", aug.flips}}},
      {"noise", config.noise_enabled ? (config.noise_after_injection ? "after-injection" : "before-injection")
                                     : "off"},
  };
  return {std::move(hu), std::move(target), std::move(meta)};
}

PatchSample sample_patch(const SourceVolume& source, uint64_t index, const SamplerConfig& config) {
  PatchDraft draft = draft_patch(source, index, config);
  // (6) four clinical windows
  return {apply_window_bank(draft.hu, config.windows), std::move(draft.target), std::move(draft.meta)};
}

// ---------------------------------------------------------------------------
// Shard container

namespace {

constexpr std::string_view kShardMagic = "CSHD1\n";

}  // namespace

json ShardHeader::to_json() const {
  return {{"config", config},
          {"record_count", record_count},
          {"patch_size", patch_size},
          {"channel_order", channel_order}};
}

std::vector<char> encode_shard_header(const ShardHeader& header) {
  const std::string text = header.to_json().dump();
  std::vector<char> out;
  detail::put_bytes(out, std::string(kShardMagic));
  detail::put_le<uint64_t>(out, text.size());
  detail::put_bytes(out, text);
  return out;
}

std::vector<char> encode_shard_record(const PatchSample& sample) {
  const std::string meta = sample.meta.dump();
  std::vector<char> out;
  out.reserve(sample.channels.channels.size() * 4 + sample.target.size() + 4 + meta.size());
  detail::put_le_array<float>(out, sample.channels.channels);
  detail::put_le_array<uint8_t>(out, sample.target.voxels());
  detail::put_le<uint32_t>(out, static_cast<uint32_t>(meta.size()));
  detail::put_bytes(out, meta);
  return out;
}

ShardReader::ShardReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open shard " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<uint64_t>(in.tellg());
  in.seekg(0);
  char prefix[14];
  if (file_size < sizeof prefix || !in.read(prefix, sizeof prefix) ||
      std::string_view(prefix, kShardMagic.size()) != kShardMagic) {
    fail(Errc::bad_magic, "not a CSHD shard (bad magic): " + path.string());
  }
  const auto header_len = detail::get_le<uint64_t>(prefix + 6);
  if (header_len > file_size - sizeof prefix) fail(Errc::corrupt, "shard header length exceeds file size");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  json h;
  try {
    h = json::parse(text);
    header_.config = h.at("config");
    header_.record_count = h.at("record_count").get<uint64_t>();
    header_.patch_size = h.at("patch_size").get<int64_t>();
    header_.channel_order = h.at("channel_order").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(Errc::corrupt, std::string("shard header is malformed: ") + e.what());
  }
  if (header_.patch_size <= 0) fail(Errc::corrupt, "shard patch_size must be positive");

  const uint64_t n = static_cast<uint64_t>(header_.patch_size) * header_.patch_size * header_.patch_size;
  const uint64_t fixed = 4 * n * 4 + n;
  uint64_t offset = sizeof prefix + header_len;
  offsets_.reserve(header_.record_count + 1);
  for (uint64_t r = 0; r < header_.record_count; ++r) {
    offsets_.push_back(offset);
    if (offset + fixed + 4 > file_size) fail(Errc::corrupt, "shard truncated in record " + std::to_string(r));
    in.seekg(static_cast<std::streamoff>(offset + fixed));
    char len_bytes[4];
    in.read(len_bytes, 4);
    offset += fixed + 4 + detail::get_le<uint32_t>(len_bytes);
    if (offset > file_size) fail(Errc::corrupt, "shard truncated in record " + std::to_string(r));
  }
  offsets_.push_back(offset);
  if (offset != file_size) fail(Errc::corrupt, "shard has trailing bytes after the last record");
}

std::vector<char> ShardReader::read_raw(uint64_t index) {
  if (index >= header_.record_count) {
    fail(Errc::invalid_argument,
         "record " + std::to_string(index) + " out of range (" + std::to_string(header_.record_count) + " records)");
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) fail(Errc::io, "cannot reopen shard " + path_.string());
  std::vector<char> bytes(offsets_[index + 1] - offsets_[index]);
  in.seekg(static_cast<std::streamoff>(offsets_[index]));
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) fail(Errc::io, "short read on shard");
  return bytes;
}

ShardRecord ShardReader::read(uint64_t index) {
  const auto bytes = read_raw(index);
  const auto n = static_cast<size_t>(header_.patch_size * header_.patch_size * header_.patch_size);
  ShardRecord rec;
  rec.channels.resize(4 * n);
  rec.target.resize(n);
  detail::get_le_array<float>(bytes.data(), std::span<float>(rec.channels));
  detail::get_le_array<uint8_t>(bytes.data() + 16 * n, std::span<uint8_t>(rec.target));
  const auto meta_len = detail::get_le<uint32_t>(bytes.data() + 17 * n);
  try {
    rec.meta = json::parse(std::string(bytes.data() + 17 * n + 4, meta_len));
  } catch (const json::exception& e) {
    fail(Errc::corrupt, std::string("record metadata is not valid JSON: ") + e.what());
  }
  return rec;
}

json ShardSummary::to_json() const {
  return {{"records", records},
          {"calcified", calcified},
          {"noncalcified", noncalcified},
          {"empty_targets", empty_targets},
          {"empty_target_fraction", empty_target_fraction},
          {"seconds", seconds},
          {"patches_per_second", patches_per_second},
          {"positive_indices", positive_indices}};
}

ShardSummary generate_shard(const std::vector<SourceVolume>& sources, uint64_t count, const SamplerConfig& config,
                            const std::filesystem::path& path, unsigned workers) {
  config.validate();
  if (count > 0 && sources.empty()) fail(Errc::invalid_argument, "generate_shard needs at least one source volume");
  workers = std::max(1u, workers);
  const auto t0 = std::chrono::steady_clock::now();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot create shard " + path.string());
  ShardHeader header{to_json(config), count, config.patch_size, {}};
  for (const auto& w : config.windows) header.channel_order.push_back(w.name);
  const auto head = encode_shard_header(header);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));

  struct Done {
    std::vector<char> bytes;
    std::optional<LesionKind> kind;
    bool empty = true;
  };

  ShardSummary summary;
  std::mutex mu;
  std::condition_variable cv;
  std::map<uint64_t, Done> ready;
  std::atomic<uint64_t> next_task{0};
  uint64_t next_write = 0;
  struct Failure {
    uint64_t index;
    Errc code;
    std::string what;
  };
  std::optional<Failure> failure;
  const uint64_t window = 2ULL * workers;

  auto worker = [&] {
    for (;;) {
      const uint64_t i = next_task.fetch_add(1);
      if (i >= count) return;
      {
        // Indices below a recorded failure still run so the reported index is
        // the lowest failing one whatever the scheduling.
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return failure.has_value() || i < next_write + window; });
        if (failure && i > failure->index) return;
      }
      Done done;
      try {
        const SourceVolume& src = sources[i % sources.size()];
        PatchSample s = sample_patch(src, i, config);
        done.bytes = encode_shard_record(s);
        done.empty = s.meta.at("target_voxels").get<int64_t>() == 0;
        if (!s.meta.at("lesion_kind").is_null()) {
          done.kind = lesion_kind_from_string(s.meta.at("lesion_kind").get<std::string>());
        }
      } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        std::lock_guard lock(mu);
        if (!failure || i < failure->index) failure = Failure{i, err ? err->code() : Errc::synthesis, e.what()};
        cv.notify_all();
        return;
      }
      std::lock_guard lock(mu);
      ready.emplace(i, std::move(done));
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);

  {
    std::unique_lock lock(mu);
    while (next_write < count) {
      cv.wait(lock, [&] { return failure.has_value() || ready.count(next_write) > 0; });
      if (failure) break;
      Done done = std::move(ready.at(next_write));
      ready.erase(next_write);
      const uint64_t i = next_write++;
      cv.notify_all();
      lock.unlock();
      out.write(done.bytes.data(), static_cast<std::streamsize>(done.bytes.size()));
      if (done.kind) (*done.kind == LesionKind::calcified ? summary.calcified : summary.noncalcified)++;
      if (done.empty) {
        summary.empty_targets++;
      } else {
        summary.positive_indices.push_back(i);
      }
      lock.lock();
    }
  }
  for (auto& t : pool) t.join();
  if (failure) {
    out.close();
    std::error_code ec;
    std::filesystem::remove(path, ec);
    fail(failure->code, "patch " + std::to_string(failure->index) + " failed: " + failure->what);
  }
  out.flush();
  if (!out) fail(Errc::io, "write failed on shard " + path.string());

  summary.records = count;
  summary.empty_target_fraction = count ? static_cast<double>(summary.empty_targets) / static_cast<double>(count) : 0.0;
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary.patches_per_second = summary.seconds > 0.0 ? static_cast<double>(count) / summary.seconds : 0.0;
  return summary;
}

}  // namespace ctsynth
