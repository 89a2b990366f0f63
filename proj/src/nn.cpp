#include "alix/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "alix/ops.hpp"

namespace alix {

namespace {

const double kReluGain = std::numbers::sqrt2;

Tensor param(Shape shape, std::vector<double> values) { return Tensor(std::move(shape), std::move(values), true); }

}  // namespace

std::string to_string(LixPlacement p) {
  switch (p) {
    case LixPlacement::none:
      return "none";
    case LixPlacement::after_each_nonlinearity:
      return "after-each-nonlinearity";
    case LixPlacement::after_final_nonlinearity:
      return "after-final-nonlinearity";
  }
  return "none";
}

LixPlacement lix_placement_from_string(const std::string& s) {
  if (s == "none") return LixPlacement::none;
  if (s == "after-each-nonlinearity" || s == "each") return LixPlacement::after_each_nonlinearity;
  if (s == "after-final-nonlinearity" || s == "final") return LixPlacement::after_final_nonlinearity;
  throw std::invalid_argument("unknown lix placement '" + s + "'");
}

void EncoderConfig::validate() const {
  if (feature_maps.empty()) throw std::invalid_argument("encoder needs at least one conv layer");
  if (filter_sizes.size() != feature_maps.size() || strides.size() != feature_maps.size())
    throw std::invalid_argument("encoder config: feature_maps, filter_sizes and strides must have equal length");
  if (channels_in == 0) throw std::invalid_argument("encoder config: channels_in must be positive");
  if (trunk_dim == 0) throw std::invalid_argument("encoder config: trunk_dim must be positive");
  for (std::size_t i = 0; i < feature_maps.size(); ++i) {
    if (strides[i] == 0) throw std::invalid_argument("encoder config: strides must be >= 1");
    if (feature_maps[i] == 0 || filter_sizes[i].first == 0 || filter_sizes[i].second == 0)
      throw std::invalid_argument("encoder config: zero-sized layer");
  }
  spatial_shapes();
}

std::vector<std::pair<std::size_t, std::size_t>> EncoderConfig::spatial_shapes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out{{input_height, input_width}};
  for (std::size_t i = 0; i < feature_maps.size(); ++i) {
    const auto [h, w] = out.back();
    const auto [kh, kw] = filter_sizes[i];
    if (kh > h + 2 * padding || kw > w + 2 * padding)
      throw std::invalid_argument("encoder config: layer " + std::to_string(i) + " kernel exceeds its input");
    out.emplace_back((h + 2 * padding - kh) / strides[i] + 1, (w + 2 * padding - kw) / strides[i] + 1);
  }
  return out;
}

Shape EncoderConfig::feature_shape() const {
  const auto [h, w] = spatial_shapes().back();
  return {feature_maps.back(), h, w};
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<Tensor> p;
  for (std::size_t i = 0; i < conv_weight.size(); ++i) {
    p.push_back(conv_weight[i]);
    p.push_back(conv_bias[i]);
  }
  p.insert(p.end(), {trunk_weight, trunk_bias, norm_gain, norm_shift});
  return p;
}

std::vector<std::pair<std::string, Tensor>> Encoder::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> p;
  for (std::size_t i = 0; i < conv_weight.size(); ++i) {
    p.emplace_back("conv" + std::to_string(i) + ".weight", conv_weight[i]);
    p.emplace_back("conv" + std::to_string(i) + ".bias", conv_bias[i]);
  }
  p.emplace_back("trunk.weight", trunk_weight);
  p.emplace_back("trunk.bias", trunk_bias);
  p.emplace_back("norm.gain", norm_gain);
  p.emplace_back("norm.shift", norm_shift);
  return p;
}

std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  // Orthonormalize the columns of a tall Gaussian matrix (modified
  // Gram-Schmidt), then transpose back when rows < cols.
  const bool transpose = rows < cols;
  const std::size_t n = transpose ? cols : rows;  // long side
  const std::size_t m = transpose ? rows : cols;  // short side
  std::vector<double> a(n * m);  // column-major: column c at a[c*n]
  for (auto& x : a) x = rng.normal();
  for (std::size_t c = 0; c < m; ++c) {
    double* col = a.data() + c * n;
    for (std::size_t p = 0; p < c; ++p) {
      const double* prev = a.data() + p * n;
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += prev[i] * col[i];
      for (std::size_t i = 0; i < n; ++i) col[i] -= d * prev[i];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) col[i] /= norm;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = gain * (transpose ? a[r * n + c] : a[c * n + r]);
  return out;
}

Encoder build_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  Encoder enc;
  enc.config = cfg;
  std::size_t cin = cfg.channels_in;
  for (std::size_t i = 0; i < cfg.feature_maps.size(); ++i) {
    const std::size_t cout = cfg.feature_maps[i];
    const auto [kh, kw] = cfg.filter_sizes[i];
    enc.conv_weight.push_back(param({cout, cin, kh, kw}, orthogonal_init(cout, cin * kh * kw, kReluGain, rng)));
    enc.conv_bias.push_back(Tensor({cout}, 0.0, true));
    cin = cout;
  }
  const std::size_t flat = shape_numel(cfg.feature_shape());
  enc.trunk_weight = param({cfg.trunk_dim, flat}, orthogonal_init(cfg.trunk_dim, flat, 1.0, rng));
  enc.trunk_bias = Tensor({cfg.trunk_dim}, 0.0, true);
  enc.norm_gain = Tensor({cfg.trunk_dim}, 1.0, true);
  enc.norm_shift = Tensor({cfg.trunk_dim}, 0.0, true);
  return enc;
}

EncoderOutput encode_features(const Encoder& enc, const Tensor& obs, const LixContext* lix) {
  const auto& cfg = enc.config;
  if (obs.rank() != 4 || obs.dim(1) != cfg.channels_in || obs.dim(2) != cfg.input_height ||
      obs.dim(3) != cfg.input_width)
    throw std::invalid_argument("encode: observation shape " + shape_str(obs.shape()) + " does not match encoder input");
  EncoderOutput out;
  Tensor h = obs;
  const std::size_t layers = cfg.feature_maps.size();
  std::size_t lix_index = 0;
  for (std::size_t i = 0; i < layers; ++i) {
    h = relu(conv2d(h, enc.conv_weight[i], enc.conv_bias[i], cfg.strides[i], cfg.padding));
    const bool place = lix && (cfg.lix_placement == LixPlacement::after_each_nonlinearity ||
                               (cfg.lix_placement == LixPlacement::after_final_nonlinearity && i + 1 == layers));
    if (place) {
      ShiftField field;
      if (lix->shifts) {
        if (lix_index >= lix->shifts->size()) throw std::invalid_argument("encode: too few fixed shift fields");
        field = (*lix->shifts)[lix_index];
      } else if (lix->radius > 0.0) {
        if (!lix->rng) throw std::invalid_argument("encode: LIX with radius > 0 needs an RNG");
        field = sample_shift_field(h.dim(0), h.dim(2), h.dim(3), lix->radius, *lix->rng, lix->granularity);
      } else {
        field = ShiftField::zeros(h.dim(0), h.dim(2), h.dim(3));
      }
      h = lix_forward(h, field);
      out.lix_outputs.push_back(h);
      out.shifts.push_back(std::move(field));
      ++lix_index;
    }
  }
  out.features = h;
  return out;
}

Tensor encode_trunk(const Encoder& enc, const Tensor& features) {
  return tanh(layer_norm(linear(flatten(features), enc.trunk_weight, enc.trunk_bias), enc.norm_gain, enc.norm_shift));
}

EncoderOutput encode(const Encoder& enc, const Tensor& obs, const LixContext* lix) {
  EncoderOutput out = encode_features(enc, obs, lix);
  out.trunk = encode_trunk(enc, out.features);
  return out;
}

std::vector<Tensor> MLP::parameters() const {
  std::vector<Tensor> p;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    p.push_back(weight[i]);
    p.push_back(bias[i]);
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> MLP::named_parameters(const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> p;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    p.emplace_back(prefix + ".l" + std::to_string(i) + ".weight", weight[i]);
    p.emplace_back(prefix + ".l" + std::to_string(i) + ".bias", bias[i]);
  }
  return p;
}

MLP build_mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("build_mlp: need at least input and output sizes");
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("build_mlp: zero layer width");
  MLP mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = i + 2 == sizes.size();
    mlp.weight.push_back(param({sizes[i + 1], sizes[i]}, orthogonal_init(sizes[i + 1], sizes[i], last ? 1.0 : kReluGain, rng)));
    mlp.bias.push_back(Tensor({sizes[i + 1]}, 0.0, true));
  }
  return mlp;
}

Tensor mlp_forward(const MLP& mlp, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < mlp.weight.size(); ++i) {
    h = linear(h, mlp.weight[i], mlp.bias[i]);
    if (i + 1 < mlp.weight.size()) h = relu(h);
  }
  return h;
}

void polyak_update(std::span<Tensor> target, std::span<const Tensor> online, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("polyak_update: rho must lie in [0, 1]");
  if (target.size() != online.size()) throw std::invalid_argument("polyak_update: parameter trees differ in size");
  for (std::size_t k = 0; k < target.size(); ++k)
    if (target[k].shape() != online[k].shape())
      throw std::invalid_argument("polyak_update: parameter " + std::to_string(k) + " shape mismatch");
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto t = target[k].values_mut();
    auto o = online[k].values();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rho * t[i] + (1.0 - rho) * o[i];
  }
}

Encoder clone(const Encoder& enc) {
  Encoder c;
  c.config = enc.config;
  for (const auto& w : enc.conv_weight) c.conv_weight.push_back(w.clone());
  for (const auto& b : enc.conv_bias) c.conv_bias.push_back(b.clone());
  c.trunk_weight = enc.trunk_weight.clone();
  c.trunk_bias = enc.trunk_bias.clone();
  c.norm_gain = enc.norm_gain.clone();
  c.norm_shift = enc.norm_shift.clone();
  return c;
}

MLP clone(const MLP& mlp) {
  MLP c;
  for (const auto& w : mlp.weight) c.weight.push_back(w.clone());
  for (const auto& b : mlp.bias) c.bias.push_back(b.clone());
  return c;
}

void set_requires_grad(std::span<Tensor> params, bool on) {
  for (auto& p : params) p.set_requires_grad(on);
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

void fill_zero(std::span<Tensor> params) {
  for (auto& p : params) std::fill(p.values_mut().begin(), p.values_mut().end(), 0.0);
}

}  // namespace alix
