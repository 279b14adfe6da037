#include "ctsynth/losses.hpp"

#include <cmath>
#include <string>

#include "ctsynth/error.hpp"

namespace ctsynth {

void LossParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    fail(Errc::invalid_argument, "loss params need alpha, beta, gamma >= 0");
  }
  if (!(eps > 0.0 && eps < 1e-3)) fail(Errc::invalid_argument, "loss eps must be in (0, 1e-3)");
}

namespace {

void check_inputs(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  params.validate();
  if (p.size() != y.size()) {
    fail(Errc::invalid_argument,
         "prediction/target length mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(y.size()));
  }
  if (p.empty()) fail(Errc::invalid_argument, "loss needs at least one voxel");
}

struct Clamped {
  double value;
  bool active;  // derivative passes through
};

inline Clamped clamp_prob(double p, double eps) {
  if (p <= eps) return {eps, false};
  if (p >= 1.0 - eps) return {1.0 - eps, false};
  return {p, true};
}

LossAndGrad tversky_impl(std::span<const double> p, std::span<const uint8_t> y, const LossParams& k, bool grad) {
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_prob(p[i], k.eps).value;
    if (y[i]) {
      tp += q;
      fn += 1.0 - q;
    } else {
      fp += q;
    }
  }
  const double num = tp + k.eps;
  const double den = tp + k.alpha * fp + k.beta * fn + k.eps;
  LossAndGrad out{1.0 - num / den, {}};
  if (!grad) return out;
  out.grad.resize(p.size());
  // d(num)/dq = y;  d(den)/dq = y (1 - beta) + (1 - y) alpha
  const double d_pos = -((den - num * (1.0 - k.beta)) / (den * den));
  const double d_neg = num * k.alpha / (den * den);
  for (size_t i = 0; i < p.size(); ++i) {
    out.grad[i] = clamp_prob(p[i], k.eps).active ? (y[i] ? d_pos : d_neg) : 0.0;
  }
  return out;
}

LossAndGrad focal_impl(std::span<const double> p, std::span<const uint8_t> y, const LossParams& k, bool grad) {
  const double n = static_cast<double>(p.size());
  LossAndGrad out;
  if (grad) out.grad.resize(p.size());
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Clamped c = clamp_prob(p[i], k.eps);
    const double pt = y[i] ? c.value : 1.0 - c.value;
    const double one_minus = 1.0 - pt;
    const double ln_pt = std::log(pt);
    sum += -std::pow(one_minus, k.gamma) * ln_pt;
    if (!grad) continue;
    if (!c.active) {
      out.grad[i] = 0.0;
      continue;
    }
    // d/dpt [-(1-pt)^g ln pt] = g (1-pt)^(g-1) ln pt - (1-pt)^g / pt
    const double mod = k.gamma == 0.0 ? 0.0 : k.gamma * std::pow(one_minus, k.gamma - 1.0) * ln_pt;
    const double d_pt = mod - std::pow(one_minus, k.gamma) / pt;
    out.grad[i] = (y[i] ? d_pt : -d_pt) / n;
  }
  out.value = sum / n;
  return out;
}

}  // namespace

double tversky_loss(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  check_inputs(p, y, params);
  return tversky_impl(p, y, params, false).value;
}

double focal_loss(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  check_inputs(p, y, params);
  return focal_impl(p, y, params, false).value;
}

LossAndGrad tversky_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  check_inputs(p, y, params);
  return tversky_impl(p, y, params, true);
}

LossAndGrad focal_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  check_inputs(p, y, params);
  return focal_impl(p, y, params, true);
}

LossAndGrad total_loss_and_grad(std::span<const double> p, std::span<const uint8_t> y, const LossParams& params) {
  check_inputs(p, y, params);
  LossAndGrad t = tversky_impl(p, y, params, true);
  const LossAndGrad f = focal_impl(p, y, params, true);
  t.value += f.value;
  for (size_t i = 0; i < t.grad.size(); ++i) t.grad[i] += f.grad[i];
  return t;
}

}  // namespace ctsynth
