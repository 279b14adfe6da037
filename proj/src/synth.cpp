#include "ctsynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace ctsynth {

std::string to_string(LesionKind kind) { return kind == LesionKind::calcified ? "calcified" : "noncalcified"; }

LesionKind lesion_kind_from_string(const std::string& s) {
  if (s == "calcified") return LesionKind::calcified;
  if (s == "noncalcified") return LesionKind::noncalcified;
  fail(Errc::invalid_argument, "unknown lesion kind '" + s + "'");
}

HuRange lesion_hu_range(LesionKind kind) {
  return kind == LesionKind::calcified ? HuRange{800.0, 1500.0} : HuRange{30.0, 90.0};
}

double LesionSpec::max_sigma() const {
  double m = 0.0;
  for (const auto& b : blobs) m = std::max(m, b.sigma);
  return m;
}

void LesionSpec::validate() const {
  if (blobs.empty() || blobs.size() > 3) fail(Errc::invalid_argument, "lesion needs 1-3 blobs");
  for (const auto& b : blobs) {
    if (b.sigma < kSigmaMin || b.sigma > kSigmaMax) {
      fail(Errc::invalid_argument, "blob sigma " + std::to_string(b.sigma) + " outside [0.7, 2.0]");
    }
    if (!(b.weight > 0.0 && b.weight <= 1.0)) fail(Errc::invalid_argument, "blob weight must be in (0, 1]");
  }
  const HuRange r = lesion_hu_range(kind);
  if (target_hu < r.lo || target_hu > r.hi) {
    fail(Errc::invalid_argument, "target HU " + std::to_string(target_hu) + " outside the " + to_string(kind) +
                                     " range");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) fail(Errc::invalid_argument, "lesion threshold must be in (0, 1)");
}

nlohmann::json to_json(const LesionSpec& spec) {
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& b : spec.blobs) {
    blobs.push_back({{"center_offset_voxels", b.center}, {"sigma_voxels", b.sigma}, {"weight", b.weight}});
  }
  return {{"kind", to_string(spec.kind)}, {"blobs", blobs}, {"target_hu", spec.target_hu}, {"threshold", spec.threshold}};
}

LesionSpec lesion_spec_from_json(const nlohmann::json& j) {
  LesionSpec s;
  s.kind = lesion_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& b : j.at("blobs")) {
    s.blobs.push_back({b.at("center_offset_voxels").get<std::array<double, 3>>(), b.at("sigma_voxels").get<double>(),
                       b.at("weight").get<double>()});
  }
  s.target_hu = j.at("target_hu").get<double>();
  s.threshold = j.at("threshold").get<double>();
  return s;
}

LesionSpec sample_lesion_spec(Rng& rng, LesionKind kind, double threshold) {
  LesionSpec spec;
  spec.kind = kind;
  spec.threshold = threshold;
  const auto n = static_cast<int>(rng.below(3)) + 1;
  for (int k = 0; k < n; ++k) {
    Blob b;
    b.sigma = rng.uniform(kSigmaMin, kSigmaMax);
    b.weight = rng.uniform(0.5, 1.0);
    if (k > 0) {
      const Blob& parent = spec.blobs[rng.below(static_cast<uint64_t>(k))];
      for (int a = 0; a < 3; ++a) b.center[a] = parent.center[a] + rng.uniform(-1.5, 1.5) * parent.sigma;
    }
    spec.blobs.push_back(b);
  }
  const HuRange r = lesion_hu_range(kind);
  spec.target_hu = rng.uniform(r.lo, r.hi);
  return spec;
}

int64_t LesionStamp::voxel_count() const { return std::count(mask.begin(), mask.end(), uint8_t{1}); }

double LesionStamp::blend_weight(size_t i) const {
  if (!mask[i]) return 0.0;
  const double s = (field[i] - threshold * field_max) / ((1.0 - threshold) * field_max);
  return std::clamp(s, 0.0, 1.0);
}

namespace {

// Single-component check with 26-connectivity, local to the stamp box.
bool is_26_connected(const LesionStamp& st) {
  const auto total = st.voxel_count();
  if (total == 0) return false;
  std::vector<uint8_t> seen(st.mask.size(), 0);
  std::vector<Index3> stack{st.peak};
  seen[static_cast<size_t>(st.index(st.peak[0], st.peak[1], st.peak[2]))] = 1;
  int64_t reached = 0;
  while (!stack.empty()) {
    const Index3 v = stack.back();
    stack.pop_back();
    ++reached;
    for (int64_t dz = -1; dz <= 1; ++dz)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dx = -1; dx <= 1; ++dx) {
          const int64_t x = v[0] + dx, y = v[1] + dy, z = v[2] + dz;
          if (x < 0 || y < 0 || z < 0 || x >= st.dims.x || y >= st.dims.y || z >= st.dims.z) continue;
          const auto i = static_cast<size_t>(st.index(x, y, z));
          if (st.mask[i] && !seen[i]) {
            seen[i] = 1;
            stack.push_back({x, y, z});
          }
        }
  }
  return reached == total;
}

}  // namespace

LesionStamp rasterize_lesion(const LesionSpec& spec) {
  spec.validate();
  const double reach = 3.0 * spec.max_sigma();
  std::array<double, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -std::numeric_limits<double>::infinity();
    for (const auto& b : spec.blobs) {
      lo[a] = std::min(lo[a], b.center[a]);
      hi[a] = std::max(hi[a], b.center[a]);
    }
  }
  LesionStamp st;
  st.threshold = spec.threshold;
  for (int a = 0; a < 3; ++a) {
    st.origin[a] = static_cast<int64_t>(std::floor(lo[a] - reach));
    st.dims[a] = static_cast<int64_t>(std::ceil(hi[a] + reach)) - st.origin[a] + 1;
  }
  st.field.assign(static_cast<size_t>(st.dims.count()), 0.0);
  st.mask.assign(st.field.size(), 0);

  double best = -1.0;
  for (int64_t z = 0; z < st.dims.z; ++z)
    for (int64_t y = 0; y < st.dims.y; ++y)
      for (int64_t x = 0; x < st.dims.x; ++x) {
        const double px = static_cast<double>(st.origin[0] + x);
        const double py = static_cast<double>(st.origin[1] + y);
        const double pz = static_cast<double>(st.origin[2] + z);
        double f = 0.0;
        for (const auto& b : spec.blobs) {
          const double dx = px - b.center[0], dy = py - b.center[1], dz = pz - b.center[2];
          f += b.weight * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.sigma * b.sigma));
        }
        st.field[static_cast<size_t>(st.index(x, y, z))] = f;
        if (f > best) {
          best = f;
          st.peak = {x, y, z};
        }
      }
  st.field_max = best;
  const double cut = spec.threshold * best;
  for (size_t i = 0; i < st.field.size(); ++i) st.mask[i] = st.field[i] >= cut ? 1 : 0;

  st.anchor_radius = static_cast<int64_t>(std::ceil(reach));
  if (!(best > 0.0) || st.voxel_count() == 0) fail(Errc::synthesis, "lesion rasterized to an empty mask");
  if (!is_26_connected(st)) fail(Errc::synthesis, "lesion mask is not 26-connected");
  for (int64_t z = 0; z < st.dims.z; ++z)
    for (int64_t y = 0; y < st.dims.y; ++y)
      for (int64_t x = 0; x < st.dims.x; ++x) {
        if (!st.mask[static_cast<size_t>(st.index(x, y, z))]) continue;
        const int64_t cheb = std::max({std::abs(x - st.peak[0]), std::abs(y - st.peak[1]), std::abs(z - st.peak[2])});
        if (cheb > st.anchor_radius) fail(Errc::synthesis, "lesion mask extends past its anchoring radius");
      }
  return st;
}

Lesion synthesize_lesion(Rng& rng, LesionKind kind, double threshold, int max_retries) {
  for (int attempt = 0;; ++attempt) {
    LesionSpec spec = sample_lesion_spec(rng, kind, threshold);
    try {
      LesionStamp stamp = rasterize_lesion(spec);
      return {std::move(spec), std::move(stamp)};
    } catch (const Error& e) {
      if (e.code() != Errc::synthesis || attempt >= max_retries) throw;
    }
  }
}

InjectResult inject_lesion(Volume& patch, const MaskVolume& artery_mask, const LesionStamp& stamp, double target_hu,
                           Rng& rng, MaskVolume& lesion_mask, BlendMode mode) {
  require_same_dims(patch, artery_mask, "inject_lesion");
  require_same_dims(patch, lesion_mask, "inject_lesion");
  const int64_t n_artery = count_foreground(artery_mask);
  if (n_artery == 0) fail(Errc::placement, "cannot place lesion: artery mask is empty");

  uint64_t pick = rng.below(static_cast<uint64_t>(n_artery));
  int64_t chosen = -1;
  const auto av = artery_mask.voxels();
  for (size_t i = 0; i < av.size(); ++i) {
    if (av[i] && pick-- == 0) {
      chosen = static_cast<int64_t>(i);
      break;
    }
  }
  const Index3 anchor = patch.coords(chosen);

  InjectResult result{anchor, 0};
  const Index3 shift{anchor[0] - stamp.peak[0], anchor[1] - stamp.peak[1], anchor[2] - stamp.peak[2]};
  for (int64_t z = 0; z < stamp.dims.z; ++z)
    for (int64_t y = 0; y < stamp.dims.y; ++y)
      for (int64_t x = 0; x < stamp.dims.x; ++x) {
        const auto si = static_cast<size_t>(stamp.index(x, y, z));
        if (!stamp.mask[si]) continue;
        const int64_t px = x + shift[0], py = y + shift[1], pz = z + shift[2];
        if (!patch.contains(px, py, pz)) continue;
        float& hu = patch(px, py, pz);
        const double s = mode == BlendMode::hard ? 1.0 : stamp.blend_weight(si);
        hu = static_cast<float>((1.0 - s) * hu + s * target_hu);
        if (!lesion_mask(px, py, pz)) ++result.lesion_voxels;
        lesion_mask(px, py, pz) = 1;
      }
  return result;
}

}  // namespace ctsynth
