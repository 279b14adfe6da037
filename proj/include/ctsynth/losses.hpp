#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ctsynth {

/// Composite segmentation loss: Tversky(alpha on FP, beta on FN) + focal(gamma).
struct LossParams {
  double alpha = 0.1;
  double beta = 0.9;
  double gamma = 4.0;
  double eps = 1e-6;

  void validate() const;
};

/// 1 - (TP + eps) / (TP + alpha FP + beta FN + eps) with
/// TP = sum p y, FP = sum p (1 - y), FN = sum (1 - p) y, p clamped to [eps, 1-eps].
double tversky_loss(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params);

/// mean over voxels of -(1 - p_t)^gamma ln p_t, p_t = p for y = 1, 1 - p otherwise.
double focal_loss(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params);

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Exact derivative of the clamped loss; zero where p is clamped.
LossAndGrad tversky_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params);
LossAndGrad focal_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params);

/// tversky + focal and its gradient with respect to every p_i.
LossAndGrad total_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params);

}  // namespace ctsynth
