#include <gtest/gtest.h>

#include "ctsynth/archcheck.hpp"
#include "test_util.hpp"

using namespace ctsynth;

TEST(Arch, DefaultReproducesReferenceTable) {
  const auto rows = infer_shapes(default_arch(), Dims::cube(96));
  const std::vector<StageShape> want = {
      {"input", 4, Dims::cube(96)},           {"encoder.stage1", 32, Dims::cube(96)},
      {"encoder.stage2", 64, Dims::cube(48)}, {"encoder.stage3", 128, Dims::cube(24)},
      {"encoder.stage4", 256, Dims::cube(12)}, {"decoder.stage3", 128, Dims::cube(24)},
      {"decoder.stage2", 64, Dims::cube(48)}, {"decoder.stage1", 32, Dims::cube(96)},
      {"output", 1, Dims::cube(96)},
  };
  EXPECT_EQ(rows, want);
  const auto report = validate_default();
  EXPECT_TRUE(report.pass()) << report.to_text();
  EXPECT_EQ(report.rows.size(), 9u);
  EXPECT_EQ(report.invariants.size(), 2u);
}

TEST(Arch, SixtyFourBottleneck) {
  const auto rows = infer_shapes(default_arch(), Dims::cube(64));
  EXPECT_EQ(rows[4].dims, Dims::cube(8));
  EXPECT_EQ(rows[4].channels, 256);
  EXPECT_EQ(rows.back().dims, Dims::cube(64));
}

TEST(Arch, IndivisibleInputNamesStage) {
  // 50 -> stage2 /2 = 25 -> stage3 cannot halve 25.
  try {
    infer_shapes(default_arch(), Dims::cube(50));
    ADD_FAILURE() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
    EXPECT_NE(std::string(e.what()).find("encoder.stage3"), std::string::npos) << e.what();
  }
}

TEST(Arch, PerturbedFeaturesFailSingleRow) {
  auto a = default_arch();
  a.encoder[1].features = 65;
  const auto r = validate_arch(a);
  EXPECT_FALSE(r.pass());
  int failing = 0;
  for (const auto& row : r.rows) {
    if (!row.pass) {
      ++failing;
      EXPECT_EQ(row.name, "encoder.stage2");
    }
  }
  EXPECT_EQ(failing, 1);
}

TEST(Arch, DecoderMismatchFailsMirrorInvariant) {
  auto a = default_arch();
  a.decoder[2].features = 16;
  const auto r = validate_arch(a);
  EXPECT_FALSE(r.pass());
  bool mirror_failed = false;
  for (const auto& row : r.invariants)
    if (row.name == "invariant.decoder-mirrors-encoder") mirror_failed = !row.pass;
  EXPECT_TRUE(mirror_failed);
}

TEST(Arch, CompositionIsAssociative) {
  const auto ops = shape_ops(default_arch());
  const StageShape in{"input", 4, Dims::cube(96)};
  const auto all = apply_shape_ops(ops, in);
  for (size_t k = 1; k < ops.size(); ++k) {
    const std::vector<ShapeOp> head(ops.begin(), ops.begin() + static_cast<long>(k));
    const std::vector<ShapeOp> tail(ops.begin() + static_cast<long>(k), ops.end());
    auto first = apply_shape_ops(head, in);
    const auto second = apply_shape_ops(tail, first.back());
    first.insert(first.end(), second.begin(), second.end());
    EXPECT_EQ(first, all);
  }
}

TEST(Arch, JsonRoundTripAndMalformed) {
  const auto j = to_json(default_arch());
  EXPECT_EQ(to_json(arch_from_json(j)), j);
  EXPECT_ERRC(arch_from_json(nlohmann::json{{"encoder", 3}}), Errc::invalid_argument);
  auto bad = j;
  bad["encoder"][0]["stride"] = {3, 1, 1};
  EXPECT_ERRC(arch_from_json(bad), Errc::invalid_argument);
}
