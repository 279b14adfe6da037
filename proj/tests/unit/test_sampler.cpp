#include <gtest/gtest.h>

#include <fstream>

#include "ctsynth/phantom.hpp"
#include "ctsynth/sampler.hpp"
#include "ctsynth/volume_io.hpp"
#include "test_util.hpp"

using namespace ctsynth;

namespace {

SourceVolume phantom_source(uint64_t seed, const std::string& id) {
  PhantomConfig pc;
  pc.dims = Dims::cube(64);
  pc.seed = seed;
  auto ph = generate_phantom(pc);
  return {id, std::move(ph.volume), std::move(ph.artery)};
}

const std::vector<SourceVolume>& corpus() {
  static const std::vector<SourceVolume> c = {phantom_source(1, "ph_a"), phantom_source(2, "ph_b")};
  return c;
}

SamplerConfig small_config() {
  SamplerConfig c;
  c.patch_size = 32;
  c.master_seed = 11;
  return c;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  SamplerConfig c = small_config();
  c.blend_mode = BlendMode::hard;
  c.noise.i0 = 5e4;
  c.augment.zoom_min = 0.95;
  const auto j = to_json(c);
  EXPECT_EQ(to_json(sampler_config_from_json(j)), j);
  EXPECT_EQ(to_json(parse_sampler_config(j.dump(2))), j);
  EXPECT_EQ(to_json(parse_sampler_config("{}")), to_json(SamplerConfig{}));
}

TEST(Config, Defaults) {
  const SamplerConfig c;
  EXPECT_EQ(c.patch_size, 96);
  EXPECT_EQ(c.target_spacing_mm, (Spacing{0.5, 0.5, 0.5}));
  EXPECT_EQ(c.lesion_probability, 0.8);
  EXPECT_EQ(c.kind_probability_calcified, 0.5);
  EXPECT_EQ(c.max_lesions_per_patch, 1);
  EXPECT_EQ(c.augment.rotation_max_deg, 15.0);
  EXPECT_EQ(c.augment.zoom_min, 0.9);
  EXPECT_EQ(c.augment.zoom_max, 1.1);
  EXPECT_TRUE(c.noise_after_injection);
  EXPECT_EQ(c.noise.i0, 1e5);
  EXPECT_EQ(c.noise.path_mm, 200.0);
  EXPECT_EQ(c.noise.sigma_e, 2.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_ERRC(parse_sampler_config(R"({"patch_sise": 64})"), Errc::invalid_argument);
  EXPECT_ERRC(parse_sampler_config(R"({"noise": {"io": 1}})"), Errc::invalid_argument);
  EXPECT_ERRC(parse_sampler_config(R"({"patch_size": 8})"), Errc::invalid_argument);
  EXPECT_ERRC(parse_sampler_config(R"({"lesion_probability": 1.5})"), Errc::invalid_argument);
  EXPECT_ERRC(parse_sampler_config(R"({"patch_size": "big"})"), Errc::invalid_argument);
}

TEST(Config, ParseErrorCarriesLineAndColumn) {
  try {
    parse_sampler_config("{\n  \"patch_size\": 64,\n  \"lesion_probability\": ,\n}");
    ADD_FAILURE() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("column"), std::string::npos) << e.what();
  }
}

TEST(Sampler, NoLesionBranch) {
  auto c = small_config();
  c.lesion_probability = 0.0;
  for (uint64_t i = 0; i < 5; ++i) {
    const auto s = sample_patch(corpus()[0], i, c);
    EXPECT_EQ(count_foreground(s.target), 0);
    EXPECT_TRUE(s.meta.at("lesion_kind").is_null());
    EXPECT_EQ(s.channels.channels.size(), 4u * 32 * 32 * 32);
  }
}

TEST(Sampler, ForcedLesionBranch) {
  auto c = small_config();
  c.lesion_probability = 1.0;
  for (uint64_t i = 0; i < 20; ++i) {
    const auto s = sample_patch(corpus()[i % 2], i, c);
    EXPECT_GT(count_foreground(s.target), 0) << "index " << i;
    EXPECT_EQ(s.meta.at("target_voxels").get<int64_t>(), count_foreground(s.target));
    EXPECT_EQ(s.meta.at("lesions").size(), 1u);
  }
}

TEST(Sampler, OutputInvariants) {
  const auto c = small_config();
  for (uint64_t i = 0; i < 10; ++i) {
    const auto s = sample_patch(corpus()[0], i, c);
    for (float v : s.channels.channels) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
    EXPECT_NO_THROW(require_binary(s.target));
    EXPECT_EQ(count_foreground(s.target) == 0, s.meta.at("lesion_kind").is_null());
  }
}

TEST(Sampler, DeterministicPerIndex) {
  const auto c = small_config();
  const auto a = sample_patch(corpus()[1], 3, c);
  const auto b = sample_patch(corpus()[1], 3, c);
  EXPECT_EQ(a.channels.channels, b.channels.channels);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.meta, b.meta);
  const auto other = sample_patch(corpus()[1], 4, c);
  EXPECT_NE(a.channels.channels, other.channels.channels);
}

TEST(Sampler, AnchorIsSourceArteryVoxel) {
  const auto c = small_config();
  for (uint64_t i = 0; i < 30; ++i) {
    const auto& src = corpus()[i % 2];
    const auto s = draft_patch(src, i, c);
    const auto anchor = s.meta.at("anchor_voxel").get<Index3>();
    EXPECT_EQ(src.artery(anchor[0], anchor[1], anchor[2]), 1);
  }
}

TEST(Sampler, TargetHuConsistentWithBlendBounds) {
  // Noise off: every lesion voxel lies between its pre-injection HU and the
  // lesion target; hard mode puts it exactly on the target.
  auto c = small_config();
  c.noise_enabled = false;
  c.lesion_probability = 1.0;
  auto c0 = c;
  c0.lesion_probability = 0.0;
  for (uint64_t i = 0; i < 20; ++i) {
    const auto& src = corpus()[i % 2];
    const auto with = draft_patch(src, i, c);
    const auto without = draft_patch(src, i, c0);
    const double t = with.meta.at("lesions")[0].at("target_hu").get<double>();
    for (size_t k = 0; k < with.hu.size(); ++k) {
      if (!with.target[k]) {
        EXPECT_EQ(with.hu[k], without.hu[k]);
        continue;
      }
      const double lo = std::min<double>(without.hu[k], t), hi = std::max<double>(without.hu[k], t);
      EXPECT_GE(with.hu[k], lo - 1e-3);
      EXPECT_LE(with.hu[k], hi + 1e-3);
    }
  }
  c.blend_mode = BlendMode::hard;
  for (uint64_t i = 0; i < 20; ++i) {
    const auto s = sample_patch(corpus()[i % 2], i, c);
    const auto kind = lesion_kind_from_string(s.meta.at("lesion_kind").get<std::string>());
    const auto range = lesion_hu_range(kind);
    const auto calc = s.channels.channel(3);
    const auto fat = s.channels.channel(0);
    for (size_t k = 0; k < s.target.size(); ++k) {
      if (!s.target[k]) continue;
      if (kind == LesionKind::calcified) {
        const double hu = 500.0 + 1500.0 * calc[k];  // invert the calcification window
        EXPECT_GE(hu, range.lo - 0.1);
        EXPECT_LE(hu, range.hi + 0.1);
      } else {
        const double hu = -100.0 + 240.0 * fat[k];  // 30-90 HU is inside the fat window
        EXPECT_GE(hu, range.lo - 0.1);
        EXPECT_LE(hu, range.hi + 0.1);
        EXPECT_EQ(calc[k], 0.0f);
      }
    }
  }
}

TEST(Sampler, EmptyArteryIsPlacementError) {
  SourceVolume s{"empty", Volume(Dims::cube(32), {0.5, 0.5, 0.5}, 0.0f), MaskVolume(Dims::cube(32), {0.5, 0.5, 0.5}, 0)};
  EXPECT_ERRC(sample_patch(s, 0, small_config()), Errc::placement);
}

TEST(Sampler, MakeSourceResamples) {
  Volume v(Dims::cube(8), {1, 1, 1}, 10.0f);
  MaskVolume m(Dims::cube(8), {1, 1, 1}, 1);
  const auto s = make_source("x", v, m, small_config());
  EXPECT_EQ(s.volume.dims(), Dims::cube(16));
  EXPECT_EQ(s.artery.dims(), Dims::cube(16));
  EXPECT_EQ(s.volume.spacing(), (Spacing{0.5, 0.5, 0.5}));
}

TEST(Shard, EmptyShardIsValid) {
  const auto dir = testutil::scratch_dir("shard");
  const auto sum = generate_shard(corpus(), 0, small_config(), dir / "e.cshd");
  EXPECT_EQ(sum.records, 0u);
  ShardReader r(dir / "e.cshd");
  EXPECT_EQ(r.size(), 0u);
  EXPECT_EQ(r.header().patch_size, 32);
  EXPECT_ERRC(r.read(0), Errc::invalid_argument);
}

TEST(Shard, RecordsEqualDirectSamples) {
  const auto dir = testutil::scratch_dir("shard");
  const auto c = small_config();
  const auto sum = generate_shard(corpus(), 6, c, dir / "s.cshd");
  ShardReader r(dir / "s.cshd");
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r.header().config, to_json(c));
  EXPECT_EQ(r.header().channel_order, (std::vector<std::string>{"fat", "soft_tissue", "angiographic", "calcification"}));
  uint64_t empty = 0;
  for (uint64_t i = 0; i < 6; ++i) {
    const auto s = sample_patch(corpus()[i % 2], i, c);
    const auto rec = r.read(i);
    EXPECT_EQ(rec.channels, s.channels.channels);
    EXPECT_EQ(rec.target, s.target.data());
    EXPECT_EQ(rec.meta, s.meta);
    EXPECT_EQ(r.read_raw(i), encode_shard_record(s));
    empty += count_foreground(s.target) == 0;
  }
  EXPECT_EQ(sum.empty_targets, empty);
  EXPECT_EQ(sum.calcified + sum.noncalcified, 6 - empty);
  EXPECT_EQ(sum.positive_indices.size(), 6 - empty);
}

TEST(Shard, BytesInvariantToWorkersAndRepeats) {
  const auto dir = testutil::scratch_dir("shard");
  const auto c = small_config();
  generate_shard(corpus(), 12, c, dir / "w1.cshd", 1);
  generate_shard(corpus(), 12, c, dir / "w2.cshd", 2);
  generate_shard(corpus(), 12, c, dir / "w8.cshd", 8);
  generate_shard(corpus(), 12, c, dir / "w1b.cshd", 1);
  const auto ref = slurp(dir / "w1.cshd");
  EXPECT_EQ(slurp(dir / "w2.cshd"), ref);
  EXPECT_EQ(slurp(dir / "w8.cshd"), ref);
  EXPECT_EQ(slurp(dir / "w1b.cshd"), ref);
}

TEST(Shard, EmptyTargetFractionReproducible) {
  const auto dir = testutil::scratch_dir("shard");
  auto c = small_config();
  c.patch_size = 16;
  const auto a = generate_shard(corpus(), 100, c, dir / "a.cshd", 2);
  const auto b = generate_shard(corpus(), 100, c, dir / "b.cshd", 1);
  EXPECT_EQ(a.empty_targets, b.empty_targets);
  EXPECT_EQ(a.positive_indices, b.positive_indices);
  // Realized Bernoulli(0.8) draw: roughly 20 empty of 100.
  EXPECT_GT(a.empty_target_fraction, 0.05);
  EXPECT_LT(a.empty_target_fraction, 0.40);
}

TEST(Shard, FailureReportsLowestIndexAndRemovesFile) {
  const auto dir = testutil::scratch_dir("shard");
  auto sources = corpus();
  sources.push_back({"hollow", Volume(Dims::cube(32), {0.5, 0.5, 0.5}, 0.0f),
                     MaskVolume(Dims::cube(32), {0.5, 0.5, 0.5}, 0)});
  for (unsigned w : {1u, 4u}) {
    try {
      generate_shard(sources, 9, small_config(), dir / "f.cshd", w);
      ADD_FAILURE() << "expected placement error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::placement);
      EXPECT_NE(std::string(e.what()).find("patch 2 failed"), std::string::npos) << e.what();
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "f.cshd"));
  }
}

TEST(Shard, ReaderRejectsBadFiles) {
  const auto dir = testutil::scratch_dir("shard");
  generate_shard(corpus(), 2, small_config(), dir / "s.cshd");
  auto bytes = slurp(dir / "s.cshd");
  auto bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "bad.cshd", std::ios::binary).write(bad.data(), static_cast<std::streamsize>(bad.size()));
  EXPECT_ERRC(ShardReader(dir / "bad.cshd"), Errc::bad_magic);
  bytes.resize(bytes.size() - 100);
  std::ofstream(dir / "cut.cshd", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_ERRC(ShardReader(dir / "cut.cshd"), Errc::corrupt);
}
