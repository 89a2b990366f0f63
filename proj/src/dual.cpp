#include "alix/dual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alix/errors.hpp"

namespace alix {

void DualState::validate() const {
  if (!(S_min >= 0.0 && S_min <= S_max)) throw std::invalid_argument("dual: need 0 <= S_min <= S_max");
  if (!(S >= S_min && S <= S_max)) throw std::invalid_argument("dual: initial S outside its bounds");
  if (!(lr > 0.0)) throw std::invalid_argument("dual: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("dual: betas must lie in [0, 1)");
}

void dual_update(DualState& s, double measured_nd) {
  if (!std::isfinite(measured_nd))
    throw NumericError("dual_update: non-finite measurement " + std::to_string(measured_nd) + "; update skipped");
  const double grad = -(measured_nd - s.target_nd);
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad * grad;
  const double mhat = s.m / (1.0 - std::pow(s.beta1, static_cast<double>(s.step)));
  const double vhat = s.v / (1.0 - std::pow(s.beta2, static_cast<double>(s.step)));
  s.S = std::clamp(s.S - s.lr * mhat / (std::sqrt(vhat) + s.eps), s.S_min, s.S_max);
}

double shared_radius(std::span<const double> measurements, DualState& state) {
  if (measurements.empty()) throw std::invalid_argument("shared_radius: no measurements");
  double mean = 0.0;
  for (double m : measurements) mean += m;
  mean /= static_cast<double>(measurements.size());
  dual_update(state, mean);
  return state.S;
}

}  // namespace alix
