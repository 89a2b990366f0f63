#pragma once

#include <cstdint>
#include <span>

namespace alix {

/// Adaptive radius S, tuned by dual gradient descent so that the measured
/// robust ND of feature gradients tracks `target_nd`.
struct DualState {
  double S = 1.0;
  double target_nd = 0.635;
  double lr = 0.003;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;
  double S_min = 0.0;
  double S_max = 4.0;

  /// Throws std::invalid_argument on bounds that do not contain S or bad moments.
  void validate() const;
};

/// One Adam step on the dual loss -S * (measured - target), whose gradient in
/// S is -(measured - target). S is clamped to [S_min, S_max] afterwards.
/// Throws NumericError (leaving `state` untouched) on a non-finite measurement.
void dual_update(DualState& state, double measured_nd);

/// Averages per-layer measurements, applies one dual update and returns the
/// radius shared by every LIX layer. Throws std::invalid_argument when empty.
double shared_radius(std::span<const double> measurements, DualState& state);

}  // namespace alix
