#include "alix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "alix/lix.hpp"
#include "alix/ops.hpp"

namespace alix {

namespace {

void check_map_shape(const Shape& shape, std::size_t n) {
  if (shape.size() != 4) throw std::invalid_argument("expected a [B,C,H,W] map, got " + shape_str(shape));
  if (shape[2] < 2 || shape[3] < 2) throw std::invalid_argument("local_discontinuity: H and W must be >= 2");
  if (shape_numel(shape) != n) throw std::invalid_argument("map size does not match shape " + shape_str(shape));
}

template <class Term>
double masked_mean(std::span<const double> x, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg,
                   Term term) {
  const std::vector<double> d = local_discontinuity(x, shape, dirs);
  const std::vector<bool> mask = location_mask(shape, dirs, cfg.boundary);
  const std::size_t plane = shape[2] * shape[3];
  const std::size_t B = shape[0];
  const std::size_t per_image = shape[1] * plane;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double image_total = 0.0;
    std::size_t image_count = 0;
    for (std::size_t k = 0; k < per_image; ++k) {
      const std::size_t idx = b * per_image + k;
      if (!mask[k % plane]) continue;
      image_total += term(d[idx], x[idx]);
      ++image_count;
    }
    total += image_total;
    count += image_count;
  }
  if (count == 0) throw std::invalid_argument("no locations counted under the boundary mode");
  return total / static_cast<double>(count);
}

}  // namespace

DirectionSet DirectionSet::equiangular(std::size_t k) {
  if (k == 0) throw std::invalid_argument("direction count must be >= 1");
  // Snap components that are integers up to rounding, so axis directions hit cells exactly.
  auto snap = [](double v) { return std::abs(v - std::round(v)) < 1e-12 ? std::round(v) : v; };
  DirectionSet d;
  for (std::size_t i = 0; i < k; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    d.steps.emplace_back(snap(std::cos(theta)), snap(std::sin(theta)));
  }
  return d;
}

DirectionSet DirectionSet::random(std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("direction count must be >= 1");
  DirectionSet d;
  for (std::size_t i = 0; i < k; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    d.steps.emplace_back(std::cos(theta), std::sin(theta));
  }
  return d;
}

DirectionSet DirectionSet::random_per_location(std::size_t k, std::size_t height, std::size_t width, Rng& rng) {
  if (k == 0) throw std::invalid_argument("direction count must be >= 1");
  DirectionSet d;
  d.locations = height * width;
  d.steps.reserve(d.locations * k);
  for (std::size_t i = 0; i < d.locations * k; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    d.steps.emplace_back(std::cos(theta), std::sin(theta));
  }
  return d;
}

DirectionSet DirectionSet::axis_aligned() { return DirectionSet{{{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}}; }

DirectionSet make_directions(const NDConfig& cfg, std::size_t height, std::size_t width, Rng* rng) {
  if (cfg.monte_carlo) {
    if (!rng) throw std::invalid_argument("Monte-Carlo directions need an RNG");
    return DirectionSet::random_per_location(cfg.directions, height, width, *rng);
  }
  return DirectionSet::equiangular(cfg.directions);
}

std::vector<double> local_discontinuity(std::span<const double> z, const Shape& shape, const DirectionSet& dirs) {
  check_map_shape(shape, z.size());
  if (dirs.size() == 0) throw std::invalid_argument("local_discontinuity: empty direction set");
  const std::size_t H = shape[2], W = shape[3];
  if (dirs.locations != 0 && dirs.locations != H * W)
    throw std::invalid_argument("local_discontinuity: per-location directions drawn for a different grid");
  const std::size_t maps = shape[0] * shape[1];
  const std::size_t K = dirs.size();
  const double inv_k = 1.0 / static_cast<double>(K);

  // Stencils depend only on (i, j, direction); share them across maps.
  std::vector<MixWeights> stencils;
  stencils.reserve(H * W * K);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        const auto [dr, dc] = dirs.step(i * W + j, k);
        stencils.push_back(mix_weights(static_cast<double>(i) + dr, static_cast<double>(j) + dc, H, W));
      }

  std::vector<double> out(z.size());
  for (std::size_t m = 0; m < maps; ++m) {
    const double* map = z.data() + m * H * W;
    const MixWeights* st = stencils.data();
    for (std::size_t p = 0; p < H * W; ++p) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k, ++st) {
        // sum_q w_q (z_q - z_p): exactly zero on constant maps.
        double diff = 0.0;
        for (int q = 0; q < 4; ++q) diff += st->weight[q] * (map[st->row[q] * W + st->col[q]] - map[p]);
        acc += diff * diff;
      }
      out[m * H * W + p] = acc * inv_k;
    }
  }
  return out;
}

std::vector<double> local_discontinuity(const Tensor& z, std::size_t k, Rng& rng, bool monte_carlo) {
  if (z.rank() != 4) throw std::invalid_argument("local_discontinuity: expected [B,C,H,W]");
  NDConfig cfg;
  cfg.directions = k;
  cfg.monte_carlo = monte_carlo;
  return local_discontinuity(z.values(), z.shape(), make_directions(cfg, z.dim(2), z.dim(3), &rng));
}

std::vector<bool> location_mask(const Shape& shape, const DirectionSet& dirs, Boundary boundary) {
  const std::size_t H = shape[2], W = shape[3];
  std::vector<bool> mask(H * W, true);
  if (boundary == Boundary::clamp) return mask;
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const auto [dr, dc] = dirs.step(i * W + j, k);
        const double r = static_cast<double>(i) + dr, c = static_cast<double>(j) + dc;
        if (r < -tol || c < -tol || r > static_cast<double>(H - 1) + tol || c > static_cast<double>(W - 1) + tol)
          mask[i * W + j] = false;
      }
  return mask;
}

double mean_discontinuity(std::span<const double> z, const Shape& shape, const DirectionSet& dirs, std::size_t margin) {
  const std::vector<double> d = local_discontinuity(z, shape, dirs);
  const std::size_t H = shape[2], W = shape[3], maps = shape[0] * shape[1];
  if (2 * margin >= H || 2 * margin >= W) throw std::invalid_argument("mean_discontinuity: margin leaves no locations");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t m = 0; m < maps; ++m)
    for (std::size_t i = margin; i < H - margin; ++i)
      for (std::size_t j = margin; j < W - margin; ++j) {
        total += d[(m * H + i) * W + j];
        ++count;
      }
  return total / static_cast<double>(count);
}

double nd_score(std::span<const double> x, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg) {
  const double eps = cfg.epsilon;
  return masked_mean(x, shape, dirs, cfg, [eps](double d, double v) { return d / (v * v + eps); });
}

double robust_nd(std::span<const double> g, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg) {
  const double eps = cfg.epsilon;
  const double m = masked_mean(g, shape, dirs, cfg, [eps](double d, double v) { return std::log1p(d / (v * v + eps)); });
  if (cfg.reduction == RobustReduction::mean) return m;
  // Per-image sum, averaged over the batch.
  const std::size_t counted = [&] {
    const auto mask = location_mask(shape, dirs, cfg.boundary);
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  }();
  return m * static_cast<double>(counted * shape[1]);
}

GradEMAState::GradEMAState(double decay_) : decay(decay_) {
  if (!(decay_ > 0.0 && decay_ < 1.0)) throw std::invalid_argument("EMA decay must lie in (0, 1)");
}

double accumulated_nd(GradEMAState& state, std::span<const double> new_grad, const Shape& shape,
                      const DirectionSet& dirs, const NDConfig& cfg) {
  if (shape_numel(shape) != new_grad.size()) throw std::invalid_argument("accumulated_nd: gradient/shape mismatch");
  if (!state.initialized) {
    state.shape = shape;
    state.ema.assign(new_grad.begin(), new_grad.end());
    state.initialized = true;
  } else {
    if (state.shape != shape)
      throw std::invalid_argument("accumulated_nd: shape drift " + shape_str(state.shape) + " -> " + shape_str(shape));
    const double a = state.decay;
    for (std::size_t i = 0; i < new_grad.size(); ++i) state.ema[i] = a * state.ema[i] + (1.0 - a) * new_grad[i];
  }
  return nd_score(state.ema, state.shape, dirs, cfg);
}

NDReport nd_report(std::span<const double> g, const Shape& shape, const DirectionSet& dirs, const NDConfig& cfg,
                   GradEMAState* ema) {
  NDReport r;
  r.nd = nd_score(g, shape, dirs, cfg);
  r.robust_nd = robust_nd(g, shape, dirs, cfg);
  if (ema) r.accumulated_nd = accumulated_nd(*ema, g, shape, dirs, cfg);
  r.n_directions = dirs.size();
  r.epsilon = cfg.epsilon;
  return r;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: sequences differ in length");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double jacobian_frobenius(const std::function<Tensor(const Tensor&)>& fn, const Tensor& batch, std::size_t n_probes,
                          Rng& rng) {
  if (n_probes == 0) throw std::invalid_argument("jacobian_frobenius: n_probes must be >= 1");
  const std::size_t B = batch.dim(0);
  double total = 0.0;
  for (std::size_t p = 0; p < n_probes; ++p) {
    Tensor x = batch.detach();
    x.set_requires_grad(true);
    Tensor out = fn(x);
    std::vector<double> v(out.numel());
    for (auto& e : v) e = rng.normal();
    Tensor loss = sum(mul(out, Tensor(out.shape(), std::move(v))));
    if (!loss.requires_grad()) continue;  // output does not depend on the input
    backward(loss);
    for (double g : x.grad()) total += g * g;
  }
  return std::sqrt(total / static_cast<double>(n_probes * B));
}

double jacobian_frobenius(const Encoder& enc, const Tensor& batch, std::size_t n_probes, Rng& rng) {
  return jacobian_frobenius([&enc](const Tensor& x) { return encode(enc, x).trunk; }, batch, n_probes, rng);
}

Tensor checkerboard_perturb(const Tensor& z, double alpha, std::size_t cell) {
  if (z.rank() != 4) throw std::invalid_argument("checkerboard_perturb: expected [B,C,H,W]");
  if (cell == 0) throw std::invalid_argument("checkerboard cell size must be >= 1");
  const std::size_t H = z.dim(2), W = z.dim(3), maps = z.dim(0) * z.dim(1);
  std::vector<double> out(z.values().begin(), z.values().end());
  for (std::size_t m = 0; m < maps; ++m) {
    double* map = out.data() + m * H * W;
    const double peak = *std::max_element(map, map + H * W);
    const double scale = alpha * peak / static_cast<double>(W);
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const double sign = ((i / cell + j / cell) % 2 == 0) ? 1.0 : -1.0;
        map[i * W + j] += scale * sign;
      }
  }
  return Tensor(z.shape(), std::move(out));
}

std::vector<std::pair<double, double>> checkerboard_probe(const Tensor& z,
                                                          const std::function<Tensor(const Tensor&)>& loss_fn,
                                                          std::span<const double> amplitudes, std::size_t cell) {
  if (amplitudes.empty()) throw std::invalid_argument("checkerboard_probe: empty amplitude list");
  NoGradGuard guard;
  std::vector<std::pair<double, double>> curve;
  for (double a : amplitudes) curve.emplace_back(a, loss_fn(checkerboard_perturb(z, a, cell)).item());
  return curve;
}

}  // namespace alix
