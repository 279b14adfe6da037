#include <gtest/gtest.h>

#include <cmath>

#include "ctsynth/noise.hpp"
#include "test_util.hpp"

using namespace ctsynth;

namespace {

struct Moments {
  double mean;
  double var;
};

Moments noisy_moments(double hu, int n, uint64_t seed, const NoiseParams& p = {}) {
  Volume v({n, 1, 1}, {1, 1, 1}, static_cast<float>(hu));
  Rng rng(seed);
  const Volume out = apply_ct_noise(v, p, rng);
  double s = 0, s2 = 0;
  for (float x : out.data()) s += x;
  const double mean = s / n;
  for (float x : out.data()) s2 += (x - mean) * (x - mean);
  return {mean, s2 / (n - 1)};
}

// E[HU'] by direct summation over the Poisson pmf, with the electronic term
// integrated on a fine grid. Only valid on the inversion branch (lambda < 1000).
double exact_mean(double hu, const NoiseParams& p) {
  const double lam = expected_counts(hu, p);
  const double scale = 1000.0 / (p.path_mm * p.mu_water_per_mm);
  const int steps = 801;
  const double span = 8.0 * p.sigma_e, de = 2.0 * span / (steps - 1);
  double total = 0.0, mass = 0.0;
  double pk = std::exp(-lam);
  for (int k = 0; k < lam + 60.0 * std::sqrt(lam) + 60.0; ++k) {
    for (int j = 0; j < steps; ++j) {
      const double e = -span + j * de;
      const double w = pk * std::exp(-0.5 * e * e / (p.sigma_e * p.sigma_e));
      const double c = std::max(k + e, 0.5);
      total += w * (scale * (std::log(p.i0) - std::log(c)) - 1000.0);
      mass += w;
    }
    pk *= lam / (k + 1);
  }
  return total / mass;
}

}  // namespace

TEST(Noise, WaterCountsMatchHandArithmetic) {
  // 1e5 * exp(-0.0206 * 200) = 1e5 * exp(-4.12); series evaluation gives 1624.4514441950.
  EXPECT_NEAR(expected_counts(0.0, NoiseParams{}), 1624.451444195, 1e-6);
  EXPECT_NEAR(expected_counts(-1000.0, NoiseParams{}), 1e5, 1e-9);
  EXPECT_NEAR(expected_counts(-5000.0, NoiseParams{}), 1e5, 1e-9);  // mu floored at 0
}

TEST(Noise, CountsStrictlyDecreaseWithHu) {
  double prev = expected_counts(-999.0, NoiseParams{});
  for (double hu = -990; hu <= 3000; hu += 10) {
    const double lam = expected_counts(hu, NoiseParams{});
    EXPECT_LT(lam, prev);
    prev = lam;
  }
}

TEST(Noise, InverseTransformRoundTrips) {
  const NoiseParams p;
  for (double hu : {-900.0, -100.0, 0.0, 400.0, 1000.0, 1800.0})
    EXPECT_NEAR(counts_to_hu(expected_counts(hu, p), p), hu, 1e-9);
  // At 2000 HU lambda = 1e5 exp(-12.36) ~ 0.43 falls under the 0.5 floor.
  EXPECT_LT(expected_counts(2000.0, p), 0.5);
  EXPECT_EQ(counts_to_hu(expected_counts(2000.0, p), p), counts_to_hu(0.5, p));
  EXPECT_TRUE(std::isfinite(counts_to_hu(-50.0, p)));  // floored at 0.5
  EXPECT_EQ(counts_to_hu(-50.0, p), counts_to_hu(0.5, p));
}

TEST(Noise, NoiselessLimitIsFixedPoint) {
  NoiseParams p;
  p.i0 = 1e14;
  p.sigma_e = 0.0;
  for (double hu : {-100.0, 0.0, 400.0, 1000.0}) {
    const auto m = noisy_moments(hu, 1000, 3, p);
    EXPECT_NEAR(m.mean, hu, 0.05);
  }
}

TEST(Noise, PoissonSmallLambdaMoments) {
  Rng rng(4);
  for (double lam : {0.5, 3.0, 40.0, 750.0}) {
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = sample_poisson(rng, lam);
      ASSERT_EQ(k, std::floor(k));
      ASSERT_GE(k, 0.0);
      s += k;
      s2 += k * k;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, lam, 4 * std::sqrt(lam / n));
    EXPECT_NEAR(var / lam, 1.0, 0.03);
  }
}

TEST(Noise, PoissonPmfMatchesSmallLambda) {
  // Chi-square-style check of P(k) against the closed-form pmf at lambda = 2.
  Rng rng(5);
  const int n = 200000;
  std::array<int, 8> hist{};
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<int>(sample_poisson(rng, 2.0));
    ++hist[std::min(k, 7)];
  }
  double pk = std::exp(-2.0);
  for (int k = 0; k < 7; ++k) {
    EXPECT_NEAR(hist[k] / static_cast<double>(n), pk, 5 * std::sqrt(pk * (1 - pk) / n)) << "k=" << k;
    pk *= 2.0 / (k + 1);
  }
}

TEST(Noise, WaterVarianceWithinTenPercentOfDeltaMethod) {
  const auto m = noisy_moments(0.0, 100000, 6);
  const double predicted = delta_method_moments(0.0, NoiseParams{}).variance;
  EXPECT_NEAR(predicted, 36.3552313346895, 1e-9);
  EXPECT_NEAR(m.var / predicted, 1.0, 0.10);
}

TEST(Noise, MeanWithinThreeSeOfDeltaPrediction) {
  for (double hu : {-100.0, 0.0, 400.0, 1000.0}) {
    const int n = 100000;
    const auto m = noisy_moments(hu, n, 7 + static_cast<uint64_t>(hu + 100));
    const auto pred = delta_method_moments(hu, NoiseParams{});
    const double se = std::sqrt(m.var / n);
    EXPECT_LE(std::abs(m.mean - pred.mean), 3 * se) << "hu " << hu;
    EXPECT_NEAR(m.var / pred.variance, 1.0, 0.10) << "hu " << hu;
  }
}

TEST(Noise, DeltaMeanAgreesWithExactExpectation) {
  const NoiseParams p;
  // 1000 HU: lambda ~ 26, one standard error of a 10^5-draw mean is ~0.15 HU.
  EXPECT_NEAR(delta_method_moments(1000.0, p).mean, exact_mean(1000.0, p), 0.05);
  EXPECT_NEAR(delta_method_moments(400.0, p).mean, exact_mean(400.0, p), 0.005);
  EXPECT_NEAR(exact_mean(1000.0, p), 1005.5549, 1e-3);
}

TEST(Noise, DeterministicAndOrderIndependent) {
  Volume v({64, 3, 2}, {1, 1, 1}, 50.0f);
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 97) * 10.0f;
  Rng a(8), b(8);
  EXPECT_EQ(apply_ct_noise(v, {}, a), apply_ct_noise(v, {}, b));
  Volume w = v;
  Rng c(8);
  apply_ct_noise_inplace(w, {}, c);
  Rng d(8);
  EXPECT_EQ(w, apply_ct_noise(v, {}, d));
}

TEST(Noise, ParamsValidated) {
  NoiseParams p;
  p.i0 = 0;
  EXPECT_ERRC(p.validate(), Errc::invalid_argument);
  p = {};
  p.sigma_e = -1;
  EXPECT_ERRC(p.validate(), Errc::invalid_argument);
  p = {};
  p.mu_water_per_mm = 0;
  EXPECT_ERRC(p.validate(), Errc::invalid_argument);
}
