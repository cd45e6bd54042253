#pragma once

// Adaptive-moment optimizer with bias correction and a cosine learning-rate
// schedule (linear warmup over the first 5% of steps, decay to a 1% floor).
// Each parameter's effective step size is the schedule value times its
// group multiplier, so narrow-to-wide hyperparameter transfer holds.

#include <cmath>
#include <cstdint>

#include "ephyslab/params.hpp"

namespace ephyslab::optim {

struct OptimConfig {
  double peak_lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t total_steps = 1;
  double warmup_frac = 0.05;
  double floor_frac = 0.01;
};

// step is 0-based; warmup ramps linearly to the peak, then a half-cosine
// decays to floor_frac * peak by the end of training
inline double cosine_lr(const OptimConfig& c, std::int64_t step) {
  const std::int64_t total = c.total_steps > 0 ? c.total_steps : 1;
  std::int64_t warmup = static_cast<std::int64_t>(std::llround(c.warmup_frac * static_cast<double>(total)));
  if (warmup < 1) warmup = 1;
  const double floor = c.floor_frac * c.peak_lr;
  if (step < warmup)
    return c.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return c.peak_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  const double clamped = progress < 1.0 ? progress : 1.0;
  return floor + 0.5 * (c.peak_lr - floor) * (1.0 + std::cos(M_PI * clamped));
}

// One update from the gradients currently held in the store.
inline void adam_step(params::ParamStore& s, const OptimConfig& c, std::int64_t step) {
  const double lr_t = cosine_lr(c, step);
  const double t = static_cast<double>(step + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (auto& e : s.entries()) {
    const double lr = lr_t * e.lr_mult;
    for (std::size_t i = 0; i < e.value.data.size(); ++i) {
      const double g = e.grad.data[i];
      e.m1.data[i] = c.beta1 * e.m1.data[i] + (1.0 - c.beta1) * g;
      e.m2.data[i] = c.beta2 * e.m2.data[i] + (1.0 - c.beta2) * g * g;
      const double mhat = e.m1.data[i] / bc1;
      const double vhat = e.m2.data[i] / bc2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace ephyslab::optim
