#include <gtest/gtest.h>

#include "ctsynth/metrics.hpp"
#include "ctsynth/phantom.hpp"
#include "test_util.hpp"

using namespace ctsynth;

namespace {

PhantomConfig small_config(uint64_t seed) {
  PhantomConfig c;
  c.dims = Dims::cube(64);
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Phantom, LumenHuBeforeTexture) {
  auto c = small_config(1);
  c.texture_amplitude_hu = 0.0;
  const auto p = generate_phantom(c);
  ASSERT_GT(count_foreground(p.artery), 0);
  for (size_t i = 0; i < p.volume.size(); ++i) {
    if (!p.artery[i]) continue;
    EXPECT_GE(p.volume[i], 350.0f);
    EXPECT_LE(p.volume[i], 450.0f);
  }
}

TEST(Phantom, TextureSparesLumenAndStaysSmall) {
  auto c = small_config(2);
  const auto textured = generate_phantom(c);
  c.texture_amplitude_hu = 0.0;
  const auto flat = generate_phantom(c);
  EXPECT_EQ(textured.artery, flat.artery);
  for (size_t i = 0; i < flat.volume.size(); ++i) {
    if (flat.artery[i]) {
      EXPECT_EQ(textured.volume[i], flat.volume[i]);
    } else {
      EXPECT_LE(std::abs(textured.volume[i] - flat.volume[i]), 15.0f + 1e-3f);
    }
  }
}

TEST(Phantom, DeterministicUnderSeed) {
  const auto a = generate_phantom(small_config(3));
  const auto b = generate_phantom(small_config(3));
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.artery, b.artery);
  EXPECT_NE(a.artery, generate_phantom(small_config(4)).artery);
}

TEST(Phantom, VesselsConnectedAndSparse) {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    auto c = small_config(seed);
    if (seed % 2) c.dims = Dims::cube(96);
    const auto p = generate_phantom(c);
    const auto cc = connected_components(p.artery);
    EXPECT_GE(cc.count, 1u);
    EXPECT_LE(cc.count, static_cast<uint32_t>(c.n_vessels));
    EXPECT_LT(static_cast<double>(count_foreground(p.artery)) / static_cast<double>(p.artery.size()), 0.02);
  }
}

TEST(Phantom, SingleVesselIsOneComponent) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto c = small_config(seed);
    c.n_vessels = 1;
    EXPECT_EQ(connected_components(generate_phantom(c).artery).count, 1u);
  }
}

TEST(Phantom, TissueValuesPresent) {
  auto c = small_config(5);
  c.texture_amplitude_hu = 0.0;
  const auto p = generate_phantom(c);
  bool fat = false, soft = false, myo = false;
  for (float v : p.volume.data()) {
    fat = fat || v == -80.0f;
    soft = soft || v == 40.0f;
    myo = myo || v == 45.0f;
  }
  EXPECT_TRUE(fat && soft && myo);
}

TEST(Phantom, ConfigValidation) {
  auto c = small_config(0);
  c.dims = {63, 64, 64};
  EXPECT_ERRC(generate_phantom(c), Errc::invalid_argument);
  c = small_config(0);
  c.radius_min = 0.0;
  EXPECT_ERRC(generate_phantom(c), Errc::invalid_argument);
}
