#include "ctsynth/noise.hpp"

#include <algorithm>
#include <cmath>

namespace ctsynth {

void NoiseParams::validate() const {
  if (!(i0 > 0.0) || !(path_mm > 0.0) || !(sigma_e >= 0.0) || !(mu_water_per_mm > 0.0)) {
    fail(Errc::invalid_argument, "noise params need i0 > 0, path_mm > 0, sigma_e >= 0, mu_water_per_mm > 0");
  }
}

double expected_counts(double hu, const NoiseParams& p) {
  const double mu = std::max(0.0, p.mu_water_per_mm * (1.0 + hu / 1000.0));
  return p.i0 * std::exp(-mu * p.path_mm);
}

double counts_to_hu(double counts, const NoiseParams& p) {
  const double c = std::max(counts, 0.5);
  return 1000.0 * ((-std::log(c / p.i0) / p.path_mm) / p.mu_water_per_mm - 1.0);
}

namespace {

double poisson_inversion(Rng& rng, double lambda) {
  const double u = rng.uniform();
  double pk = std::exp(-lambda);
  double cdf = pk;
  double k = 0.0;
  while (u >= cdf) {
    k += 1.0;
    pk *= lambda / k;
    const double next = cdf + pk;
    if (next == cdf) break;  // tail below double resolution
    cdf = next;
  }
  return k;
}

}  // namespace

double sample_poisson(Rng& rng, double lambda) {
  if (!(lambda > 0.0)) return 0.0;
  if (lambda >= 1000.0) {
    return lambda + std::sqrt(lambda) * rng.normal();
  }
  constexpr double kPart = 500.0;
  const int parts = static_cast<int>(std::ceil(lambda / kPart));
  const double each = lambda / parts;
  double total = 0.0;
  for (int i = 0; i < parts; ++i) total += poisson_inversion(rng, each);
  return total;
}

void apply_ct_noise_inplace(Volume& patch, const NoiseParams& params, Rng& rng) {
  params.validate();
  const Rng base(rng.next());
  const double log_i0 = std::log(params.i0);
  const double scale = 1000.0 / (params.path_mm * params.mu_water_per_mm);
  auto v = patch.voxels();
  for (size_t i = 0; i < v.size(); ++i) {
    Rng local = base.fork(i);
    const double lambda = expected_counts(v[i], params);
    double c;
    if (lambda >= 1000.0) {
      const auto [g1, g2] = local.normal_pair();
      c = lambda + std::sqrt(lambda) * g1 + params.sigma_e * g2;
    } else {
      c = sample_poisson(local, lambda) + params.sigma_e * local.normal();
    }
    c = std::max(c, 0.5);
    // HU' = 1000 ((-ln(c / i0) / L) / mu_w - 1)
    v[i] = static_cast<float>(scale * (log_i0 - std::log(c)) - 1000.0);
  }
}

Volume apply_ct_noise(const Volume& patch, const NoiseParams& params, Rng& rng) {
  Volume out = patch;
  apply_ct_noise_inplace(out, params, rng);
  return out;
}

NoiseMoments delta_method_moments(double hu, const NoiseParams& p) {
  const double lambda = expected_counts(hu, p);
  const double k = 1000.0 / (p.path_mm * p.mu_water_per_mm);
  const double v = lambda + p.sigma_e * p.sigma_e;
  const double l2 = lambda * lambda;
  const double bias = v / (2.0 * l2) - 1.0 / (3.0 * l2) + (3.0 * v * v + lambda) / (4.0 * l2 * l2);
  return {hu + k * bias, k * k * v / l2};
}

}  // namespace ctsynth
