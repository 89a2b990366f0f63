#include "alix/lix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace alix {

namespace {

void check_field(const Shape& shape, const ShiftField& s) {
  if (shape.size() != 4) throw std::invalid_argument("lix: expected [B,C,H,W], got " + shape_str(shape));
  if (s.batch != shape[0] || s.height != shape[2] || s.width != shape[3] || s.dx.size() != s.batch * s.height * s.width ||
      s.dy.size() != s.dx.size())
    throw std::invalid_argument("lix: shift field does not match feature map " + shape_str(shape));
}

// Interpolation parameters for one axis: lower index, upper index, weight on upper.
struct AxisStencil {
  std::size_t lo, hi;
  double frac;
};

AxisStencil axis_stencil(double coord, std::size_t extent) {
  const double maxc = static_cast<double>(extent - 1);
  const double c = std::clamp(coord, 0.0, maxc);
  const double fl = std::floor(c);
  const auto lo = static_cast<std::size_t>(fl);
  return {lo, std::min(lo + 1, extent - 1), c - fl};
}

}  // namespace

ShiftField ShiftField::zeros(std::size_t batch, std::size_t height, std::size_t width) {
  ShiftField f;
  f.batch = batch;
  f.height = height;
  f.width = width;
  f.dx.assign(batch * height * width, 0.0);
  f.dy.assign(batch * height * width, 0.0);
  return f;
}

MixWeights mix_weights(double row, double col, std::size_t height, std::size_t width) {
  const AxisStencil r = axis_stencil(row, height);
  const AxisStencil c = axis_stencil(col, width);
  // (ceil - x) with ceil = floor + 1 is (1 - frac).
  MixWeights m;
  m.weight = {(1.0 - r.frac) * (1.0 - c.frac), (1.0 - r.frac) * c.frac, r.frac * (1.0 - c.frac), r.frac * c.frac};
  m.row = {r.lo, r.lo, r.hi, r.hi};
  m.col = {c.lo, c.hi, c.lo, c.hi};
  return m;
}

double bilinear_sample(const double* map, std::size_t height, std::size_t width, double row, double col) {
  const MixWeights m = mix_weights(row, col, height, width);
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += m.weight[k] * map[m.row[k] * width + m.col[k]];
  return v;
}

ShiftField sample_shift_field(std::size_t batch, std::size_t height, std::size_t width, double radius, Rng& rng,
                              ShiftGranularity granularity) {
  if (!(radius >= 0.0)) throw std::invalid_argument("sample_shift_field: radius must be non-negative");
  ShiftField f = ShiftField::zeros(batch, height, width);
  f.radius = radius;
  if (radius == 0.0) return f;
  const Rng base(rng.next());
  const std::size_t plane = height * width;
  for (std::size_t b = 0; b < batch; ++b) {
    Rng sub = base.split(b);
    if (granularity == ShiftGranularity::per_image) {
      const double dx = sub.uniform(-radius, radius);
      const double dy = sub.uniform(-radius, radius);
      std::fill_n(f.dx.begin() + b * plane, plane, dx);
      std::fill_n(f.dy.begin() + b * plane, plane, dy);
    } else {
      for (std::size_t p = 0; p < plane; ++p) {
        f.dx[b * plane + p] = sub.uniform(-radius, radius);
        f.dy[b * plane + p] = sub.uniform(-radius, radius);
      }
    }
  }
  return f;
}

std::vector<double> lix_forward(std::span<const double> z, const Shape& shape, const ShiftField& s) {
  check_field(shape, s);
  const std::size_t B = shape[0], C = shape[1], H = shape[2], W = shape[3];
  std::vector<double> out(z.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t si = s.index(b, i, j);
        const MixWeights m = mix_weights(static_cast<double>(i) + s.dx[si], static_cast<double>(j) + s.dy[si], H, W);
        for (std::size_t c = 0; c < C; ++c) {
          const double* map = z.data() + (b * C + c) * H * W;
          double v = 0.0;
          for (int k = 0; k < 4; ++k) v += m.weight[k] * map[m.row[k] * W + m.col[k]];
          out[((b * C + c) * H + i) * W + j] = v;
        }
      }
  return out;
}

std::vector<double> lix_backward(std::span<const double> grad_out, const Shape& shape, const ShiftField& s) {
  check_field(shape, s);
  const std::size_t B = shape[0], C = shape[1], H = shape[2], W = shape[3];
  std::vector<double> grad_in(grad_out.size(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t si = s.index(b, i, j);
        const MixWeights m = mix_weights(static_cast<double>(i) + s.dx[si], static_cast<double>(j) + s.dy[si], H, W);
        for (std::size_t c = 0; c < C; ++c) {
          const double g = grad_out[((b * C + c) * H + i) * W + j];
          double* map = grad_in.data() + (b * C + c) * H * W;
          for (int k = 0; k < 4; ++k) map[m.row[k] * W + m.col[k]] += m.weight[k] * g;
        }
      }
  return grad_in;
}

Tensor lix_forward(const Tensor& z, const ShiftField& shifts) {
  std::vector<double> out = lix_forward(z.values(), z.shape(), shifts);
  return make_result(z.shape(), std::move(out), {z}, [z, shifts](std::span<const double> g) {
    accumulate_grad(z, lix_backward(g, z.shape(), shifts));
  });
}

Tensor lix_backward(const Tensor& grad_out, const ShiftField& shifts) {
  return Tensor(grad_out.shape(), lix_backward(grad_out.values(), grad_out.shape(), shifts));
}

Tensor shift_crop(const Tensor& images, std::size_t pad, std::span<const std::pair<std::size_t, std::size_t>> offsets) {
  if (images.rank() != 4) throw std::invalid_argument("shift_crop: expected [B,C,H,W]");
  const std::size_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  if (pad >= std::min(H, W)) throw std::invalid_argument("random_shift_aug: pad must be smaller than min(H, W)");
  if (offsets.size() != B) throw std::invalid_argument("shift_crop: one offset pair per image required");
  auto in = images.values();
  std::vector<double> out(in.size());
  const long ipad = static_cast<long>(pad);
  for (std::size_t b = 0; b < B; ++b) {
    const auto [oy, ox] = offsets[b];
    if (oy > 2 * pad || ox > 2 * pad) throw std::invalid_argument("shift_crop: offset outside [0, 2*pad]");
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = in.data() + (b * C + c) * H * W;
      double* dst = out.data() + (b * C + c) * H * W;
      for (std::size_t i = 0; i < H; ++i) {
        // padded row oy + i maps to source row oy + i - pad, clamped (replicate).
        const long si = std::clamp(static_cast<long>(oy + i) - ipad, 0L, static_cast<long>(H) - 1);
        for (std::size_t j = 0; j < W; ++j) {
          const long sj = std::clamp(static_cast<long>(ox + j) - ipad, 0L, static_cast<long>(W) - 1);
          dst[i * W + j] = src[si * W + sj];
        }
      }
    }
  }
  return Tensor(images.shape(), std::move(out));
}

Tensor random_shift_aug(const Tensor& images, std::size_t pad, Rng& rng) {
  if (images.rank() != 4) throw std::invalid_argument("random_shift_aug: expected [B,C,H,W]");
  if (pad >= std::min(images.dim(2), images.dim(3)))
    throw std::invalid_argument("random_shift_aug: pad must be smaller than min(H, W)");
  if (pad == 0) return images.detach();
  std::vector<std::pair<std::size_t, std::size_t>> offsets(images.dim(0));
  const auto hi = static_cast<std::int64_t>(2 * pad);
  for (auto& o : offsets) {
    o.first = static_cast<std::size_t>(rng.integer(0, hi));
    o.second = static_cast<std::size_t>(rng.integer(0, hi));
  }
  return shift_crop(images, pad, offsets);
}

}  // namespace alix
