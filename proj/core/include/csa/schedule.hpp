#pragma once

#include <cmath>
#include <stdexcept>

namespace csa {

/// Polynomially diminishing stepsizes alpha_k = alpha / (k + h)^z.
/// h >= 1 guarantees alpha_k / alpha_{k+1} <= 2, which the bound
/// derivations rely on.
struct StepSchedule {
  double alpha = 1.0;
  double h = 1.0;
  double z = 1.0;

  StepSchedule() = default;
  StepSchedule(double alpha_, double h_, double z_) : alpha(alpha_), h(h_), z(z_) {
    if (!(alpha > 0.0)) throw std::invalid_argument("StepSchedule: alpha must be > 0");
    if (!(h >= 1.0)) throw std::invalid_argument("StepSchedule: h must be >= 1");
    if (!(z > 0.0 && z <= 1.0)) throw std::invalid_argument("StepSchedule: z must be in (0,1]");
  }

  double at(double k) const {
    return alpha / std::pow(k + h, z);
  }
};

inline double stepsize_at(const StepSchedule& s, double k) {
  if (k < 0) throw std::invalid_argument("stepsize_at: k must be >= 0");
  return s.at(k);
}

}  // namespace csa
