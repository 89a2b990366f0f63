#include "alix/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alix/errors.hpp"

namespace alix {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void require_finite(std::span<const double> v, const char* op) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
}

// Dot product with four independent accumulators (fixed order, deterministic).
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    double* crow = C + m * N;
    const double* arow = A + m * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = arow[k];
      if (a != 0.0) axpy(a, B + k * N, crow, N);
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n < N; ++n) C[m * N + n] += dot(A + m * K, B + n * K, K);
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t k = 0; k < K; ++k) {
    const double* brow = B + k * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double a = A[k * M + m];
      if (a != 0.0) axpy(a, brow, C + m * N, N);
    }
  }
}

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t positions() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4)
    throw std::invalid_argument("conv2d: expected rank-4 input and kernel, got " + shape_str(input.shape()) +
                                " and " + shape_str(kernel.shape()));
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernel.dim(1) != g.cin)
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " +
                                std::to_string(g.cin));
  if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  return g;
}

// cols[k, p] for one sample; k = (c*kh + u)*kw + v, p = oy*wo + ox.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t u = 0; u < g.kh; ++u)
      for (std::size_t v = 0; v < g.kw; ++v) {
        double* row = cols + ((c * g.kh + u) * g.kw + v) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + u) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + v) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) && ix < static_cast<long>(g.w);
            row[oy * g.wo + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, const ConvGeometry& g, double* dx) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t u = 0; u < g.kh; ++u)
      for (std::size_t v = 0; v < g.kw; ++v) {
        const double* row = cols + ((c * g.kh + u) * g.kw + v) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + u) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + v) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            dx[(c * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernel, const Tensor* bias, std::size_t stride,
                   std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, stride, padding);
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.cout))
    throw std::invalid_argument("conv2d: bias must have shape [Cout]");
  require_finite(input.values(), "conv2d");

  const std::size_t K = g.patch();
  const std::size_t P = g.positions();
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * P;
  std::vector<double> cols(g.batch * K * P);
  std::vector<double> out(g.batch * out_stride, 0.0);
  const double* x = input.values().data();
  const double* w = kernel.values().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    double* cb = cols.data() + b * K * P;
    im2col(x + b * in_stride, g, cb);
    double* ob = out.data() + b * out_stride;
    if (bias)
      for (std::size_t co = 0; co < g.cout; ++co) std::fill_n(ob + co * P, P, bias->values()[co]);
    gemm_nn(w, cb, ob, g.cout, K, P);
  }

  std::vector<Tensor> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  Tensor bias_t = bias ? *bias : Tensor();
  return make_result(
      {g.batch, g.cout, g.ho, g.wo}, std::move(out), std::move(inputs),
      [g, input, kernel, bias_t, cols = std::move(cols)](std::span<const double> gout) {
        const std::size_t K = g.patch();
        const std::size_t P = g.positions();
        const std::size_t out_stride = g.cout * P;
        if (kernel.requires_grad()) {
          std::vector<double> dw(g.cout * K, 0.0);
          for (std::size_t b = 0; b < g.batch; ++b)
            gemm_nt(gout.data() + b * out_stride, cols.data() + b * K * P, dw.data(), g.cout, P, K);
          accumulate_grad(kernel, dw);
        }
        if (bias_t.defined() && bias_t.requires_grad()) {
          std::vector<double> db(g.cout, 0.0);
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t co = 0; co < g.cout; ++co) {
              const double* gp = gout.data() + b * out_stride + co * P;
              double s = 0.0;
              for (std::size_t p = 0; p < P; ++p) s += gp[p];
              db[co] += s;
            }
          accumulate_grad(bias_t, db);
        }
        if (input.requires_grad()) {
          const std::size_t in_stride = g.cin * g.h * g.w;
          std::vector<double> dx(g.batch * in_stride, 0.0);
          std::vector<double> dcols(K * P);
          for (std::size_t b = 0; b < g.batch; ++b) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            gemm_tn(kernel.values().data(), gout.data() + b * out_stride, dcols.data(), K, g.cout, P);
            col2im(dcols.data(), g, dx.data() + b * in_stride);
          }
          accumulate_grad(input, dx);
        }
      });
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd dfdx) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.shape(), std::move(out), {a}, [a, dfdx](std::span<const double> g) {
    auto av = a.values();
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * dfdx(av[i]);
    accumulate_grad(a, d);
  });
}

// Maps each flat index of `shape` to its index in the reduced shape.
std::pair<Shape, std::vector<std::size_t>> reduction_map(const Shape& shape, const std::vector<std::size_t>& axes) {
  std::vector<bool> reduce(shape.size(), false);
  for (auto ax : axes) {
    if (ax >= shape.size()) throw std::invalid_argument("reduce: invalid axis " + std::to_string(ax));
    reduce[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (!reduce[i]) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < shape.size(); ++d)
      if (!reduce[d]) o = o * shape[d] + idx[d];
    map[flat] = o;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return {out_shape, map};
}

Tensor reduce_axes(const Tensor& a, const std::vector<std::size_t>& axes, bool average) {
  auto [out_shape, map] = reduction_map(a.shape(), axes);
  const std::size_t out_n = shape_numel(out_shape);
  const double scale = average ? static_cast<double>(out_n) / static_cast<double>(a.numel()) : 1.0;
  std::vector<double> out(out_n, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out[map[i]] += av[i];
  if (average)
    for (auto& v : out) v *= scale;
  return make_result(out_shape, std::move(out), {a}, [a, map = std::move(map), scale](std::span<const double> g) {
    std::vector<double> d(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) d[i] = g[map[i]] * scale;
    accumulate_grad(a, d);
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  return conv2d_impl(input, kernel, nullptr, stride, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  return conv2d_impl(input, kernel, &bias, stride, padding);
}

std::vector<double> conv2d_reference(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                     std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, stride, padding);
  std::vector<double> out(g.batch * g.cout * g.ho * g.wo, 0.0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (std::size_t oy = 0; oy < g.ho; ++oy)
        for (std::size_t ox = 0; ox < g.wo; ++ox) {
          double s = 0.0;
          for (std::size_t c = 0; c < g.cin; ++c)
            for (std::size_t u = 0; u < g.kh; ++u)
              for (std::size_t v = 0; v < g.kw; ++v) {
                const long iy = static_cast<long>(oy * stride + u) - static_cast<long>(padding);
                const long ix = static_cast<long>(ox * stride + v) - static_cast<long>(padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.h) || ix >= static_cast<long>(g.w)) continue;
                s += input.at({b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)}) *
                     kernel.at({co, c, u, v});
              }
          out[((b * g.cout + co) * g.ho + oy) * g.wo + ox] = s;
        }
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
    throw std::invalid_argument("linear: expected input [B,N], weight [M,N], bias [M]");
  const std::size_t B = input.dim(0), N = input.dim(1), M = weight.dim(0);
  if (weight.dim(1) != N || bias.dim(0) != M)
    throw std::invalid_argument("linear: shape mismatch " + shape_str(input.shape()) + " x " +
                                shape_str(weight.shape()) + " + " + shape_str(bias.shape()));
  std::vector<double> out(B * M);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m) out[b * M + m] = bias.values()[m];
  gemm_nt(input.values().data(), weight.values().data(), out.data(), B, N, M);
  return make_result({B, M}, std::move(out), {input, weight, bias}, [input, weight, bias, B, N, M](std::span<const double> g) {
    if (input.requires_grad()) {
      std::vector<double> dx(B * N, 0.0);
      gemm_nn(g.data(), weight.values().data(), dx.data(), B, M, N);
      accumulate_grad(input, dx);
    }
    if (weight.requires_grad()) {
      std::vector<double> dw(M * N, 0.0);
      gemm_tn(g.data(), input.values().data(), dw.data(), M, B, N);
      accumulate_grad(weight, dw);
    }
    if (bias.requires_grad()) {
      std::vector<double> db(M, 0.0);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t m = 0; m < M; ++m) db[m] += g[b * M + m];
      accumulate_grad(bias, db);
    }
  });
}

Tensor linear(const Tensor& input, const Tensor& weight) {
  if (weight.rank() != 2) throw std::invalid_argument("linear: expected weight [M,N]");
  return linear(input, weight, Tensor({weight.dim(0)}, 0.0));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    accumulate_grad(a, g);
    if (b.requires_grad()) {
      std::vector<double> d(g.begin(), g.end());
      for (auto& v : d) v = -v;
      accumulate_grad(b, d);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    auto av = a.values(), bv = b.values();
    if (a.requires_grad()) {
      std::vector<double> d(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * bv[i];
      accumulate_grad(a, d);
    }
    if (b.requires_grad()) {
      std::vector<double> d(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * av[i];
      accumulate_grad(b, d);
    }
  });
}

Tensor scalar_mul(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor log1p(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x <= -1.0) throw NumericError("log1p: argument <= -1");
        return std::log1p(x);
      },
      [](double x) { return 1.0 / (1.0 + x); });
}

Tensor sum(const Tensor& a) { return reduce_axes(a, [&] {
  std::vector<std::size_t> all(a.rank());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}(), false); }

Tensor mean(const Tensor& a) { return reduce_axes(a, [&] {
  std::vector<std::size_t> all(a.rank());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}(), true); }

Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes) { return reduce_axes(a, axes, false); }
Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes) { return reduce_axes(a, axes, true); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [a](std::span<const double> g) { accumulate_grad(a, g); });
}

Tensor flatten(const Tensor& a) {
  const std::size_t b = a.dim(0);
  return reshape(a, {b, a.numel() / b});
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t B = parts[0].dim(0);
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != B) throw std::invalid_argument("concat_cols: expected [B,N] tensors with equal B");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(B * total);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto v = parts[k].values();
      std::copy_n(v.data() + b * widths[k], widths[k], out.data() + b * total + off);
      off += widths[k];
    }
  }
  return make_result({B, total}, std::move(out), parts, [parts, widths, B, total](std::span<const double> g) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (parts[k].requires_grad()) {
        std::vector<double> d(B * widths[k]);
        for (std::size_t b = 0; b < B; ++b) std::copy_n(g.data() + b * total + off, widths[k], d.data() + b * widths[k]);
        accumulate_grad(parts[k], d);
      }
      off += widths[k];
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (x.rank() != 2) throw std::invalid_argument("layer_norm: expected [B,N]");
  const std::size_t B = x.dim(0), N = x.dim(1);
  if (gain.shape() != Shape{N} || shift.shape() != Shape{N})
    throw std::invalid_argument("layer_norm: gain/shift must have shape [N]");
  auto xv = x.values();
  std::vector<double> xhat(B * N), inv_std(B), out(B * N);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = xv.data() + b * N;
    double mu = 0.0;
    for (std::size_t n = 0; n < N; ++n) mu += row[n];
    mu /= static_cast<double>(N);
    double var = 0.0;
    for (std::size_t n = 0; n < N; ++n) var += (row[n] - mu) * (row[n] - mu);
    var /= static_cast<double>(N);
    inv_std[b] = 1.0 / std::sqrt(var + eps);
    for (std::size_t n = 0; n < N; ++n) {
      xhat[b * N + n] = (row[n] - mu) * inv_std[b];
      out[b * N + n] = xhat[b * N + n] * gain.values()[n] + shift.values()[n];
    }
  }
  return make_result({B, N}, std::move(out), {x, gain, shift},
                     [x, gain, shift, xhat = std::move(xhat), inv_std = std::move(inv_std), B, N](std::span<const double> g) {
                       if (gain.requires_grad() || shift.requires_grad()) {
                         std::vector<double> dg(N, 0.0), ds(N, 0.0);
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t n = 0; n < N; ++n) {
                             dg[n] += g[b * N + n] * xhat[b * N + n];
                             ds[n] += g[b * N + n];
                           }
                         accumulate_grad(gain, dg);
                         accumulate_grad(shift, ds);
                       }
                       if (x.requires_grad()) {
                         std::vector<double> dx(B * N);
                         const double inv_n = 1.0 / static_cast<double>(N);
                         for (std::size_t b = 0; b < B; ++b) {
                           double sum_d = 0.0, sum_dx = 0.0;
                           for (std::size_t n = 0; n < N; ++n) {
                             const double d = g[b * N + n] * gain.values()[n];
                             sum_d += d;
                             sum_dx += d * xhat[b * N + n];
                           }
                           for (std::size_t n = 0; n < N; ++n) {
                             const double d = g[b * N + n] * gain.values()[n];
                             dx[b * N + n] = inv_std[b] * (d - inv_n * sum_d - xhat[b * N + n] * inv_n * sum_dx);
                           }
                         }
                         accumulate_grad(x, dx);
                       }
                     });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) { return mean(square(sub(pred, target))); }

}  // namespace alix
