#include "ctsynth/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "file_util.hpp"

namespace ctsynth {

namespace {

using nlohmann::json;
using detail::get_le;
using detail::put_le;

constexpr std::string_view kCvolMagic = "CVOL1\n";
constexpr size_t kCvolPrefix = 6 + 8;

const char* dtype_tag(DType t) { return t == DType::f32 ? "f32" : "u8"; }

size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 1; }

template <typename T>
std::vector<char> encode(const Grid<T>& grid, DType dtype) {
  VolumeHeader header{grid.dims(), grid.spacing(), dtype, "x-fastest"};
  const std::string text = header.to_json();
  std::vector<char> out;
  out.reserve(kCvolPrefix + text.size() + grid.size() * sizeof(T));
  detail::put_bytes(out, std::string(kCvolMagic));
  put_le<uint64_t>(out, text.size());
  detail::put_bytes(out, text);
  detail::put_le_array<T>(out, grid.voxels());
  return out;
}

}  // namespace

std::string VolumeHeader::to_json() const {
  json j;
  j["dims"] = {dims.x, dims.y, dims.z};
  j["spacing_mm"] = {spacing_mm[0], spacing_mm[1], spacing_mm[2]};
  j["dtype"] = dtype_tag(dtype);
  j["order"] = order;
  return j.dump();
}

VolumeHeader VolumeHeader::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::corrupt, std::string("CVOL header is not valid JSON: ") + e.what());
  }
  VolumeHeader h;
  try {
    const auto dims = j.at("dims").get<std::vector<int64_t>>();
    const auto spacing = j.at("spacing_mm").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3) fail(Errc::corrupt, "CVOL dims/spacing must have 3 entries");
    h.dims = {dims[0], dims[1], dims[2]};
    h.spacing_mm = {spacing[0], spacing[1], spacing[2]};
    const auto dtype = j.at("dtype").get<std::string>();
    if (dtype == "f32") {
      h.dtype = DType::f32;
    } else if (dtype == "u8") {
      h.dtype = DType::u8;
    } else {
      fail(Errc::unsupported, "CVOL dtype '" + dtype + "' is not supported");
    }
    h.order = j.at("order").get<std::string>();
  } catch (const json::exception& e) {
    fail(Errc::corrupt, std::string("CVOL header missing or mistyped field: ") + e.what());
  }
  if (h.order != "x-fastest") fail(Errc::unsupported, "CVOL order '" + h.order + "' is not supported");
  if (h.dims.x <= 0 || h.dims.y <= 0 || h.dims.z <= 0) fail(Errc::corrupt, "CVOL dims must be positive");
  for (double s : h.spacing_mm) {
    if (!(s > 0.0) || !std::isfinite(s)) fail(Errc::corrupt, "CVOL spacing must be positive");
  }
  return h;
}

size_t VolumeHeader::payload_bytes() const { return static_cast<size_t>(dims.count()) * dtype_size(dtype); }

std::vector<char> encode_cvol(const Volume& volume) {
  require_finite(volume);
  return encode(volume, DType::f32);
}

std::vector<char> encode_cvol(const MaskVolume& mask) {
  require_binary(mask);
  return encode(mask, DType::u8);
}

AnyVolume decode_cvol(std::span<const char> bytes) {
  if (bytes.size() < kCvolPrefix || std::string_view(bytes.data(), kCvolMagic.size()) != kCvolMagic) {
    fail(Errc::bad_magic, "not a CVOL file (bad magic)");
  }
  const auto header_len = get_le<uint64_t>(bytes.data() + kCvolMagic.size());
  if (header_len > bytes.size() - kCvolPrefix) fail(Errc::corrupt, "CVOL header length exceeds file size");
  const auto header =
      VolumeHeader::from_json(std::string(bytes.data() + kCvolPrefix, static_cast<size_t>(header_len)));
  const size_t offset = kCvolPrefix + static_cast<size_t>(header_len);
  const size_t have = bytes.size() - offset;
  if (have != header.payload_bytes()) {
    fail(Errc::corrupt, "CVOL payload has " + std::to_string(have) + " bytes, header implies " +
                            std::to_string(header.payload_bytes()));
  }
  const char* payload = bytes.data() + offset;
  if (header.dtype == DType::f32) {
    Volume v(header.dims, header.spacing_mm);
    detail::get_le_array<float>(payload, v.voxels());
    require_finite(v);
    return v;
  }
  MaskVolume m(header.dims, header.spacing_mm);
  detail::get_le_array<uint8_t>(payload, m.voxels());
  require_binary(m);
  return m;
}

AnyVolume read_cvol(const std::filesystem::path& path) { return decode_cvol(detail::read_file(path)); }

Volume read_volume(const std::filesystem::path& path) {
  auto any = read_cvol(path);
  if (auto* v = std::get_if<Volume>(&any)) return std::move(*v);
  fail(Errc::unsupported, path.string() + " holds a u8 mask, expected an f32 volume");
}

MaskVolume read_mask(const std::filesystem::path& path) {
  auto any = read_cvol(path);
  if (auto* m = std::get_if<MaskVolume>(&any)) return std::move(*m);
  fail(Errc::unsupported, path.string() + " holds an f32 volume, expected a u8 mask");
}

void write_cvol(const Volume& volume, const std::filesystem::path& path) {
  detail::write_file(path, encode_cvol(volume));
}

void write_cvol(const MaskVolume& mask, const std::filesystem::path& path) {
  detail::write_file(path, encode_cvol(mask));
}

// ---------------------------------------------------------------------------
// NIfTI-1

Volume decode_nifti_subset(std::span<const char> bytes) {
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
      static_cast<unsigned char>(bytes[1]) == 0x8b) {
    fail(Errc::unsupported, "gzip-compressed NIfTI is not supported; decompress to .nii first");
  }
  if (bytes.size() < 348) fail(Errc::corrupt, "NIfTI header truncated");

  const auto raw_size = get_le<int32_t>(bytes.data());
  bool swap = false;
  if (raw_size == 348) {
    swap = false;
  } else if (detail::byteswap_value(raw_size) == 348) {
    swap = true;
  } else {
    fail(Errc::bad_magic, "NIfTI sizeof_hdr is not 348");
  }
  auto rd = [&](size_t off, auto tag) {
    using T = decltype(tag);
    T v = get_le<T>(bytes.data() + off);
    return swap ? detail::byteswap_value(v) : v;
  };

  const std::string_view magic(bytes.data() + 344, 4);
  if (magic == std::string_view("ni1\0", 4)) {
    fail(Errc::unsupported, "two-file NIfTI (.hdr/.img) is not supported");
  }
  if (magic != std::string_view("n+1\0", 4)) fail(Errc::bad_magic, "NIfTI magic is not n+1");

  const int16_t ndim = rd(40, int16_t{});
  if (ndim < 3 || ndim > 7) fail(Errc::unsupported, "NIfTI must be 3D, dim[0]=" + std::to_string(ndim));
  Dims dims{rd(42, int16_t{}), rd(44, int16_t{}), rd(46, int16_t{})};
  for (int k = 4; k <= ndim; ++k) {
    if (rd(40 + 2 * k, int16_t{}) > 1) fail(Errc::unsupported, "NIfTI with more than 3 non-singleton dims");
  }
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) fail(Errc::corrupt, "NIfTI dims must be positive");

  const int16_t datatype = rd(70, int16_t{});
  size_t elem = 0;
  switch (datatype) {
    case 2: elem = 1; break;
    case 4: elem = 2; break;
    case 8: elem = 4; break;
    case 16: elem = 4; break;
    default: fail(Errc::unsupported, "NIfTI datatype " + std::to_string(datatype) + " is not supported");
  }

  Spacing spacing{};
  for (int k = 0; k < 3; ++k) {
    spacing[k] = std::fabs(static_cast<double>(rd(80 + 4 * k, float{})));
    if (!(spacing[k] > 0.0) || !std::isfinite(spacing[k])) fail(Errc::corrupt, "NIfTI pixdim must be positive");
  }

  const float vox_offset = rd(108, float{});
  const float slope = rd(112, float{});
  const float inter = rd(116, float{});
  if (!(vox_offset >= 348.0f)) fail(Errc::corrupt, "NIfTI vox_offset before end of header");
  const auto offset = static_cast<size_t>(vox_offset);
  const size_t expected = static_cast<size_t>(dims.count()) * elem;
  if (offset > bytes.size() || bytes.size() - offset != expected) {
    fail(Errc::corrupt, "NIfTI payload size does not match header (" + std::to_string(expected) + " bytes expected)");
  }

  const bool scaled = slope != 0.0f && std::isfinite(slope);
  Volume out(dims, spacing);
  const char* p = bytes.data() + offset;
  for (size_t i = 0; i < out.size(); ++i) {
    double v = 0.0;
    switch (datatype) {
      case 2: v = static_cast<unsigned char>(p[i]); break;
      case 4: {
        auto s = get_le<int16_t>(p + 2 * i);
        v = swap ? detail::byteswap_value(s) : s;
        break;
      }
      case 8: {
        auto s = get_le<int32_t>(p + 4 * i);
        v = swap ? detail::byteswap_value(s) : s;
        break;
      }
      default: {
        auto s = get_le<float>(p + 4 * i);
        v = swap ? detail::byteswap_value(s) : s;
        break;
      }
    }
    if (scaled) v = v * slope + inter;
    out[i] = static_cast<float>(v);
  }
  require_finite(out);
  return out;
}

Volume read_nifti_subset(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    fail(Errc::unsupported, "compressed NIfTI (" + path.string() + ") is not supported");
  }
  return decode_nifti_subset(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Resampling and cropping

Dims resampled_dims(const Dims& dims, const Spacing& spacing, const Spacing& target_mm) {
  Dims out;
  for (int a = 0; a < 3; ++a) {
    if (!(target_mm[a] > 0.0)) fail(Errc::invalid_argument, "target spacing must be positive");
    const double n = std::round(static_cast<double>(dims[a]) * spacing[a] / target_mm[a]);
    out[a] = std::max<int64_t>(1, static_cast<int64_t>(n));
  }
  return out;
}

namespace {

struct AxisMap {
  std::vector<int64_t> lo;
  std::vector<int64_t> hi;
  std::vector<double> w;  // weight of hi
  std::vector<int64_t> nearest;
};

AxisMap axis_map(int64_t out_n, int64_t in_n, double in_spacing, double out_spacing) {
  AxisMap m;
  const double ratio = out_spacing / in_spacing;
  for (int64_t i = 0; i < out_n; ++i) {
    double s = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
    const auto f = static_cast<int64_t>(std::floor(s));
    m.lo.push_back(f);
    m.hi.push_back(std::min(f + 1, in_n - 1));
    m.w.push_back(s - static_cast<double>(f));
    m.nearest.push_back(std::clamp<int64_t>(static_cast<int64_t>(std::round(s)), 0, in_n - 1));
  }
  return m;
}

template <typename T>
Grid<T> crop_impl(const Grid<T>& src, const Index3& origin, const Dims& size, T fill) {
  if (size.x <= 0 || size.y <= 0 || size.z <= 0) {
    fail(Errc::invalid_argument, "crop size must be positive, got " + to_string(size));
  }
  Grid<T> out(size, src.spacing(), fill);
  const Dims& d = src.dims();
  for (int64_t z = 0; z < size.z; ++z) {
    const int64_t sz = origin[2] + z;
    if (sz < 0 || sz >= d.z) continue;
    for (int64_t y = 0; y < size.y; ++y) {
      const int64_t sy = origin[1] + y;
      if (sy < 0 || sy >= d.y) continue;
      const int64_t x0 = std::max<int64_t>(0, -origin[0]);
      const int64_t x1 = std::min<int64_t>(size.x, d.x - origin[0]);
      if (x0 >= x1) continue;
      const T* s = &src(origin[0] + x0, sy, sz);
      std::copy(s, s + (x1 - x0), &out(x0, y, z));
    }
  }
  return out;
}

}  // namespace

Volume resample(const Volume& volume, const Spacing& target_mm, Interp mode) {
  const Dims od = resampled_dims(volume.dims(), volume.spacing(), target_mm);
  const Dims& id = volume.dims();
  AxisMap mx = axis_map(od.x, id.x, volume.spacing()[0], target_mm[0]);
  AxisMap my = axis_map(od.y, id.y, volume.spacing()[1], target_mm[1]);
  AxisMap mz = axis_map(od.z, id.z, volume.spacing()[2], target_mm[2]);
  Volume out(od, target_mm);
  for (int64_t z = 0; z < od.z; ++z) {
    for (int64_t y = 0; y < od.y; ++y) {
      for (int64_t x = 0; x < od.x; ++x) {
        if (mode == Interp::nearest) {
          out(x, y, z) = volume(mx.nearest[x], my.nearest[y], mz.nearest[z]);
          continue;
        }
        const double wx = mx.w[x], wy = my.w[y], wz = mz.w[z];
        auto at = [&](int64_t xi, int64_t yi, int64_t zi) { return static_cast<double>(volume(xi, yi, zi)); };
        auto lerp = [](double a, double b, double t) { return t == 0.0 ? a : a + (b - a) * t; };
        const double c00 = lerp(at(mx.lo[x], my.lo[y], mz.lo[z]), at(mx.hi[x], my.lo[y], mz.lo[z]), wx);
        const double c10 = lerp(at(mx.lo[x], my.hi[y], mz.lo[z]), at(mx.hi[x], my.hi[y], mz.lo[z]), wx);
        const double c01 = lerp(at(mx.lo[x], my.lo[y], mz.hi[z]), at(mx.hi[x], my.lo[y], mz.hi[z]), wx);
        const double c11 = lerp(at(mx.lo[x], my.hi[y], mz.hi[z]), at(mx.hi[x], my.hi[y], mz.hi[z]), wx);
        const double c0 = lerp(c00, c10, wy);
        const double c1 = lerp(c01, c11, wy);
        out(x, y, z) = static_cast<float>(lerp(c0, c1, wz));
      }
    }
  }
  return out;
}

MaskVolume resample(const MaskVolume& mask, const Spacing& target_mm) {
  const Dims od = resampled_dims(mask.dims(), mask.spacing(), target_mm);
  AxisMap mx = axis_map(od.x, mask.dims().x, mask.spacing()[0], target_mm[0]);
  AxisMap my = axis_map(od.y, mask.dims().y, mask.spacing()[1], target_mm[1]);
  AxisMap mz = axis_map(od.z, mask.dims().z, mask.spacing()[2], target_mm[2]);
  MaskVolume out(od, target_mm);
  for (int64_t z = 0; z < od.z; ++z) {
    for (int64_t y = 0; y < od.y; ++y) {
      for (int64_t x = 0; x < od.x; ++x) out(x, y, z) = mask(mx.nearest[x], my.nearest[y], mz.nearest[z]);
    }
  }
  return out;
}

Volume crop(const Volume& volume, const Index3& origin, const Dims& size) {
  return crop_impl(volume, origin, size, kAirHu);
}

MaskVolume crop(const MaskVolume& mask, const Index3& origin, const Dims& size) {
  return crop_impl(mask, origin, size, uint8_t{0});
}

}  // namespace ctsynth
