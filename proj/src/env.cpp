#include "alix/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace alix {

std::string to_string(RewardMode m) { return m == RewardMode::sparse ? "sparse" : "dense"; }

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "sparse") return RewardMode::sparse;
  if (s == "dense") return RewardMode::dense;
  throw std::invalid_argument("unknown reward mode '" + s + "'");
}

void DotReacherConfig::validate() const {
  if (size < 4) throw std::invalid_argument("dot-reacher: frame size must be >= 4");
  if (frame_stack == 0) throw std::invalid_argument("dot-reacher: frame_stack must be >= 1");
  if (episode_length == 0) throw std::invalid_argument("dot-reacher: episode_length must be >= 1");
  if (!(damping >= 0.0 && damping <= 1.0)) throw std::invalid_argument("dot-reacher: damping must lie in [0, 1]");
  if (!(goal_radius > 0.0)) throw std::invalid_argument("dot-reacher: goal_radius must be positive");
}

std::array<double, 2> to_pixel(double x, double y, std::size_t size) {
  const double span = static_cast<double>(size - 1);
  return {y * span, x * span};
}

DotReacher::DotReacher(DotReacherConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Observation DotReacher::reset(std::uint64_t seed) {
  Rng rng(seed);
  state_ = {};
  state_.x = rng.uniform(0.05, 0.95);
  state_.y = rng.uniform(0.05, 0.95);
  state_.gx = rng.uniform(0.05, 0.95);
  state_.gy = rng.uniform(0.05, 0.95);
  frames_.assign(cfg_.frame_stack, render_u8());
  return observation();
}

void DotReacher::set_state(const DotReacherState& s) {
  state_ = s;
  frames_.assign(cfg_.frame_stack, render_u8());
}

void DotReacher::restore(const DotReacherState& s, const Observation& obs) {
  const std::size_t frame = cfg_.size * cfg_.size;
  if (obs.pixels.size() != cfg_.frame_stack * frame)
    throw std::invalid_argument("dot-reacher: observation does not match the frame layout");
  state_ = s;
  frames_.resize(cfg_.frame_stack);
  for (std::size_t f = 0; f < cfg_.frame_stack; ++f)
    frames_[f].assign(obs.pixels.begin() + f * frame, obs.pixels.begin() + (f + 1) * frame);
}

StepResult DotReacher::step(std::array<double, 2> action) {
  StepResult r;
  for (auto& a : action) {
    if (!std::isfinite(a)) throw std::invalid_argument("dot-reacher: non-finite action");
    if (a < -1.0 || a > 1.0) r.clamped_action = true;
    a = std::clamp(a, -1.0, 1.0);
  }
  auto& s = state_;
  s.vx = cfg_.damping * s.vx + cfg_.accel * action[0];
  s.vy = cfg_.damping * s.vy + cfg_.accel * action[1];
  s.x += s.vx;
  s.y += s.vy;
  if (s.x < 0.0 || s.x > 1.0) {
    s.x = std::clamp(s.x, 0.0, 1.0);
    s.vx = 0.0;
  }
  if (s.y < 0.0 || s.y > 1.0) {
    s.y = std::clamp(s.y, 0.0, 1.0);
    s.vy = 0.0;
  }
  ++s.t;
  frames_.erase(frames_.begin());
  frames_.push_back(render_u8());
  r.obs = observation();
  r.reward = reward();
  r.done = s.t >= cfg_.episode_length;
  return r;
}

double DotReacher::distance() const { return std::hypot(state_.x - state_.gx, state_.y - state_.gy); }

double DotReacher::reward() const {
  if (cfg_.mode == RewardMode::sparse) return distance() < cfg_.goal_radius ? cfg_.sparse_reward : 0.0;
  return -cfg_.dense_scale * distance();
}

std::array<double, 6> DotReacher::proprio() const {
  return {state_.x, state_.y, state_.vx, state_.vy, state_.gx, state_.gy};
}

std::vector<double> DotReacher::render() const {
  const std::size_t n = cfg_.size;
  std::vector<double> img(n * n, 0.0);
  // Coverage falls off linearly over one pixel at the disc edge.
  auto disc = [&](double x, double y, double radius, double intensity) {
    const auto [pr, pc] = to_pixel(x, y, n);
    const auto lo_r = static_cast<long>(std::floor(pr - radius - 1)), hi_r = static_cast<long>(std::ceil(pr + radius + 1));
    const auto lo_c = static_cast<long>(std::floor(pc - radius - 1)), hi_c = static_cast<long>(std::ceil(pc + radius + 1));
    for (long i = std::max(lo_r, 0L); i <= std::min(hi_r, static_cast<long>(n) - 1); ++i)
      for (long j = std::max(lo_c, 0L); j <= std::min(hi_c, static_cast<long>(n) - 1); ++j) {
        const double d = std::hypot(static_cast<double>(i) - pr, static_cast<double>(j) - pc);
        const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        double& px = img[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
        px = std::max(px, intensity * cover);
      }
  };
  disc(state_.gx, state_.gy, cfg_.goal_radius_px, cfg_.goal_intensity);
  disc(state_.x, state_.y, cfg_.agent_radius_px, 1.0);
  return img;
}

std::vector<std::uint8_t> DotReacher::render_u8() const {
  const auto img = render();
  std::vector<std::uint8_t> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<std::uint8_t>(std::lround(img[i] * 255.0));
  return out;
}

Observation DotReacher::observation() const {
  Observation o;
  o.pixels.reserve(cfg_.frame_stack * cfg_.size * cfg_.size);
  for (const auto& f : frames_) o.pixels.insert(o.pixels.end(), f.begin(), f.end());
  return o;
}

}  // namespace alix
