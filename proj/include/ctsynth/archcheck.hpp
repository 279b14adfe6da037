#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsynth/grid.hpp"

namespace ctsynth {

struct StageSpec {
  int64_t features = 0;
  std::array<int64_t, 3> stride{1, 1, 1};
  int64_t blocks = 1;
  std::string operation;
};

/// Shape contract of the 3D residual U-Net used as the pretraining target
/// consumer. Kernel size, normalization and activation are descriptive only.
struct ArchSpec {
  int64_t input_channels = 4;
  std::vector<StageSpec> encoder;  // stage 1..4
  std::vector<StageSpec> decoder;  // listed deepest first: stage 3, 2, 1
  int64_t output_channels = 1;
  std::string kernel = "3x3x3";
  std::string normalization = "InstanceNorm";
  std::string activation = "LeakyReLU";
  std::string output_activation = "Sigmoid";
};

ArchSpec default_arch();

nlohmann::json to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const nlohmann::json& j);

struct StageShape {
  std::string name;
  int64_t channels = 0;
  Dims dims;

  bool operator==(const StageShape&) const = default;
};

/// One resolution-changing step: encoder stages divide by stride, decoder
/// stages multiply by it.
struct ShapeOp {
  std::string name;
  int64_t channels = 0;
  std::array<int64_t, 3> stride{1, 1, 1};
  bool upsample = false;
};

std::vector<ShapeOp> shape_ops(const ArchSpec& arch);

/// Applies `ops` to (channels, dims); throws Errc::shape naming the stage
/// whose stride does not divide the incoming dims.
std::vector<StageShape> apply_shape_ops(const std::vector<ShapeOp>& ops, const StageShape& input);

/// Input row followed by every encoder, decoder and output row.
std::vector<StageShape> infer_shapes(const ArchSpec& arch, const Dims& input_dims);

struct ArchRow {
  std::string name;
  std::string expected;
  std::string actual;
  bool pass = false;
};

struct ArchReport {
  std::vector<ArchRow> rows;
  std::vector<ArchRow> invariants;
  bool pass() const;
  std::string to_text() const;
};

/// Checks `arch` at 96^3 against the reference table (4x96^3 in, 32x96^3,
/// 64x48^3, 128x24^3, 256x12^3, back up to 32x96^3, 1x96^3 out) plus the
/// mirror and total-downsampling invariants.
ArchReport validate_arch(const ArchSpec& arch);
ArchReport validate_default();

}  // namespace ctsynth
