#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "alix/nn.hpp"
#include "alix/rng.hpp"
#include "alix/tensor.hpp"

namespace alix {

/// Unit displacements (row, col) used to probe local discontinuity. Either
/// one set shared by every location, or (Monte-Carlo) an independent set per
/// spatial location.
struct DirectionSet {
  std::vector<std::pair<double, double>> steps;
  std::size_t locations = 0;  // 0: shared; otherwise steps holds locations * K entries

  /// K directions at angles 2*pi*k/K.
  static DirectionSet equiangular(std::size_t k);
  /// K directions at uniformly random angles, shared by all locations.
  static DirectionSet random(std::size_t k, Rng& rng);
  /// K uniformly random angles drawn independently for each of H*W locations.
  static DirectionSet random_per_location(std::size_t k, std::size_t height, std::size_t width, Rng& rng);
  /// (+1,0), (-1,0), (0,+1), (0,-1).
  static DirectionSet axis_aligned();

  /// Directions per location.
  std::size_t size() const { return locations ? steps.size() / locations : steps.size(); }
  const std::pair<double, double>& step(std::size_t location, std::size_t k) const {
    return locations ? steps[location * size() + k] : steps[k];
  }
};

enum class Boundary {
  clamp,     // every location counts; off-grid samples are clamped
  interior,  // only locations whose probes all stay on the grid count
};

/// How the robust score aggregates per-location terms.
enum class RobustReduction { mean, sum };

struct NDConfig {
  std::size_t directions = 8;
  bool monte_carlo = false;
  double epsilon = 1e-12;
  Boundary boundary = Boundary::clamp;
  RobustReduction reduction = RobustReduction::mean;
};

/// Equiangular set, or per-location random angles for an H x W grid when
/// `cfg.monte_carlo` (then `rng` is required).
DirectionSet make_directions(const NDConfig& cfg, std::size_t height, std::size_t width, Rng* rng = nullptr);

/// D[b,c,i,j] = mean_k (z(i + v_k) - z(i, j))^2, off-grid values by clamped
/// bilinear interpolation. Requires H, W >= 2.
std::vector<double> local_discontinuity(std::span<const double> z, const Shape& shape, const DirectionSet& dirs);
std::vector<double> local_discontinuity(const Tensor& z, std::size_t k, Rng& rng, bool monte_carlo = false);

/// Locations counted under `boundary` (all of them for Boundary::clamp).
std::vector<bool> location_mask(const Shape& shape, const DirectionSet& dirs, Boundary boundary);

/// Mean of D over locations at least `margin` cells away from every border.
double mean_discontinuity(std::span<const double> z, const Shape& shape, const DirectionSet& dirs, std::size_t margin);

/// Mean of D / (x^2 + eps) over the counted locations. Works on feature maps
/// and on gradient maps alike.
double nd_score(std::span<const double> x, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg = {});
/// Mean (or per-image sum) of log(1 + D / (g^2 + eps)).
double robust_nd(std::span<const double> g, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg = {});

/// Exponential moving average of a gradient map on a fixed diagnostic batch.
struct GradEMAState {
  double decay = 0.99;
  Shape shape;
  std::vector<double> ema;
  bool initialized = false;

  explicit GradEMAState(double decay_ = 0.99);
};

/// Folds `new_grad` into the EMA (the first call copies it) and returns the
/// ND score of the accumulated map. Throws std::invalid_argument when the
/// shape differs from earlier updates.
double accumulated_nd(GradEMAState& state, std::span<const double> new_grad, const Shape& shape,
                      const DirectionSet& dirs, const NDConfig& cfg = {});

struct NDReport {
  double nd = 0.0;
  double robust_nd = 0.0;
  std::optional<double> accumulated_nd;
  std::size_t n_directions = 0;
  double epsilon = 0.0;
};

NDReport nd_report(std::span<const double> g, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg = {},
                   GradEMAState* ema = nullptr);

/// Sample Pearson correlation; nullopt when either sequence has zero variance.
/// Throws std::invalid_argument for unequal lengths or fewer than 2 points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Hutchinson-style estimate of the per-sample Jacobian Frobenius norm of
/// `fn` at `batch`: sqrt(mean over probes and samples of ||J^T v||^2) with
/// v ~ N(0, I) in output space. `fn` must treat batch rows independently.
double jacobian_frobenius(const std::function<Tensor(const Tensor&)>& fn, const Tensor& batch, std::size_t n_probes,
                          Rng& rng);

/// Same estimate for the map from observations to trunk features.
double jacobian_frobenius(const Encoder& enc, const Tensor& batch, std::size_t n_probes, Rng& rng);

/// Adds alpha * (max of map) / W * checkerboard to every feature map of `z`
/// and evaluates `loss_fn` on the result; returns (alpha, loss) pairs.
/// `cell` is the checkerboard square size in feature cells.
std::vector<std::pair<double, double>> checkerboard_probe(const Tensor& z,
                                                          const std::function<Tensor(const Tensor&)>& loss_fn,
                                                          std::span<const double> amplitudes, std::size_t cell = 1);

/// The perturbation used by `checkerboard_probe` for one amplitude.
Tensor checkerboard_perturb(const Tensor& z, double alpha, std::size_t cell = 1);

}  // namespace alix
