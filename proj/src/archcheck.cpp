#include "ctsynth/archcheck.hpp"

#include <sstream>

namespace ctsynth {

using nlohmann::json;

ArchSpec default_arch() {
  ArchSpec a;
  a.encoder = {
      {32, {1, 1, 1}, 1, "3D ResBlock"},
      {64, {2, 2, 2}, 3, "3D ResBlock"},
      {128, {2, 2, 2}, 4, "3D ResBlock"},
      {256, {2, 2, 2}, 4, "3D ResBlock (Bottleneck)"},
  };
  a.decoder = {
      {128, {2, 2, 2}, 1, "Upsampling + 3D Conv"},
      {64, {2, 2, 2}, 1, "Upsampling + 3D Conv"},
      {32, {2, 2, 2}, 1, "Upsampling + 3D Conv"},
  };
  return a;
}

namespace {

json stage_json(const StageSpec& s) {
  return {{"features", s.features}, {"stride", s.stride}, {"blocks", s.blocks}, {"operation", s.operation}};
}

StageSpec stage_from_json(const json& j) {
  StageSpec s;
  s.features = j.at("features").get<int64_t>();
  s.stride = j.at("stride").get<std::array<int64_t, 3>>();
  s.blocks = j.value("blocks", int64_t{1});
  s.operation = j.value("operation", std::string{});
  if (s.features <= 0) fail(Errc::invalid_argument, "stage features must be positive");
  for (auto st : s.stride) {
    if (st != 1 && st != 2) fail(Errc::invalid_argument, "stage strides must be 1 or 2");
  }
  return s;
}

std::string shape_text(int64_t c, const Dims& d) {
  if (d.x == d.y && d.y == d.z) return std::to_string(c) + "x" + std::to_string(d.x) + "^3";
  return std::to_string(c) + "x" + to_string(d);
}

}  // namespace

json to_json(const ArchSpec& a) {
  json enc = json::array(), dec = json::array();
  for (const auto& s : a.encoder) enc.push_back(stage_json(s));
  for (const auto& s : a.decoder) dec.push_back(stage_json(s));
  return {{"input_channels", a.input_channels},
          {"encoder", enc},
          {"decoder", dec},
          {"output_channels", a.output_channels},
          {"kernel", a.kernel},
          {"normalization", a.normalization},
          {"activation", a.activation},
          {"output_activation", a.output_activation}};
}

ArchSpec arch_from_json(const json& j) {
  ArchSpec a;
  try {
    a.input_channels = j.at("input_channels").get<int64_t>();
    a.encoder.clear();
    a.decoder.clear();
    for (const auto& s : j.at("encoder")) a.encoder.push_back(stage_from_json(s));
    for (const auto& s : j.at("decoder")) a.decoder.push_back(stage_from_json(s));
    a.output_channels = j.at("output_channels").get<int64_t>();
    a.kernel = j.value("kernel", a.kernel);
    a.normalization = j.value("normalization", a.normalization);
    a.activation = j.value("activation", a.activation);
    a.output_activation = j.value("output_activation", a.output_activation);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("malformed architecture spec: ") + e.what());
  }
  return a;
}

std::vector<ShapeOp> shape_ops(const ArchSpec& arch) {
  std::vector<ShapeOp> ops;
  for (size_t k = 0; k < arch.encoder.size(); ++k) {
    ops.push_back({"encoder.stage" + std::to_string(k + 1), arch.encoder[k].features, arch.encoder[k].stride, false});
  }
  for (size_t k = 0; k < arch.decoder.size(); ++k) {
    ops.push_back({"decoder.stage" + std::to_string(arch.decoder.size() - k), arch.decoder[k].features,
                   arch.decoder[k].stride, true});
  }
  ops.push_back({"output", arch.output_channels, {1, 1, 1}, false});
  return ops;
}

std::vector<StageShape> apply_shape_ops(const std::vector<ShapeOp>& ops, const StageShape& input) {
  std::vector<StageShape> out;
  Dims d = input.dims;
  for (const auto& op : ops) {
    for (int a = 0; a < 3; ++a) {
      if (op.upsample) {
        d[a] *= op.stride[a];
      } else {
        if (d[a] % op.stride[a] != 0) {
          fail(Errc::shape, "shape error at " + op.name + ": dim " + std::to_string(d[a]) +
                                " not divisible by stride " + std::to_string(op.stride[a]));
        }
        d[a] /= op.stride[a];
      }
    }
    out.push_back({op.name, op.channels, d});
  }
  return out;
}

std::vector<StageShape> infer_shapes(const ArchSpec& arch, const Dims& input_dims) {
  StageShape input{"input", arch.input_channels, input_dims};
  std::vector<StageShape> out{input};
  const auto rest = apply_shape_ops(shape_ops(arch), input);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

bool ArchReport::pass() const {
  for (const auto& r : rows) {
    if (!r.pass) return false;
  }
  for (const auto& r : invariants) {
    if (!r.pass) return false;
  }
  return true;
}

std::string ArchReport::to_text() const {
  std::ostringstream os;
  auto line = [&](const ArchRow& r) {
    os << (r.pass ? "PASS " : "FAIL ") << r.name << "  expected " << r.expected << "  got " << r.actual << "\n";
  };
  for (const auto& r : rows) line(r);
  for (const auto& r : invariants) line(r);
  return os.str();
}

ArchReport validate_arch(const ArchSpec& arch) {
  static const std::vector<StageShape> reference = {
      {"input", 4, Dims::cube(96)},           {"encoder.stage1", 32, Dims::cube(96)},
      {"encoder.stage2", 64, Dims::cube(48)}, {"encoder.stage3", 128, Dims::cube(24)},
      {"encoder.stage4", 256, Dims::cube(12)}, {"decoder.stage3", 128, Dims::cube(24)},
      {"decoder.stage2", 64, Dims::cube(48)}, {"decoder.stage1", 32, Dims::cube(96)},
      {"output", 1, Dims::cube(96)},
  };
  ArchReport report;
  std::vector<StageShape> actual;
  std::string shape_error;
  try {
    actual = infer_shapes(arch, Dims::cube(96));
  } catch (const Error& e) {
    shape_error = e.what();
  }
  for (size_t k = 0; k < reference.size(); ++k) {
    const auto& ref = reference[k];
    ArchRow row{ref.name, shape_text(ref.channels, ref.dims), shape_error.empty() ? "missing" : shape_error, false};
    if (k < actual.size()) {
      row.actual = actual[k].name + " " + shape_text(actual[k].channels, actual[k].dims);
      row.pass = actual[k] == ref;
    }
    report.rows.push_back(row);
  }
  if (actual.size() > reference.size()) {
    report.rows.push_back({"extra stages", "none", std::to_string(actual.size() - reference.size()), false});
  }

  // Decoder stage k (listed deepest first) mirrors encoder stage k.
  ArchRow mirror{"invariant.decoder-mirrors-encoder", "", "", true};
  const size_t nd = arch.decoder.size();
  for (size_t k = 0; k < nd; ++k) {
    const size_t enc_stage = nd - k;  // 1-based encoder stage this decoder stage returns to
    const int64_t want = enc_stage - 1 < arch.encoder.size() ? arch.encoder[enc_stage - 1].features : -1;
    mirror.expected += (k ? "/" : "") + std::to_string(want);
    mirror.actual += (k ? "/" : "") + std::to_string(arch.decoder[k].features);
    mirror.pass = mirror.pass && want == arch.decoder[k].features;
  }
  if (nd + 1 != arch.encoder.size()) mirror.pass = false;
  report.invariants.push_back(mirror);

  ArchRow total{"invariant.total-downsampling", "8", "", true};
  int64_t down = 1;
  for (const auto& s : arch.encoder) down *= s.stride[0];
  int64_t up = 1;
  for (const auto& s : arch.decoder) up *= s.stride[0];
  total.actual = std::to_string(down) + " down / " + std::to_string(up) + " up";
  for (int a = 0; a < 3; ++a) {
    int64_t da = 1, ua = 1;
    for (const auto& s : arch.encoder) da *= s.stride[a];
    for (const auto& s : arch.decoder) ua *= s.stride[a];
    total.pass = total.pass && da == 8 && ua == 8;
  }
  report.invariants.push_back(total);
  return report;
}

ArchReport validate_default() { return validate_arch(default_arch()); }

}  // namespace ctsynth
