#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "alix/rng.hpp"

namespace alix {

enum class RewardMode { sparse, dense };

std::string to_string(RewardMode m);
RewardMode reward_mode_from_string(const std::string& s);

struct DotReacherConfig {
  std::size_t size = 32;          // frame side in pixels
  std::size_t frame_stack = 2;
  std::size_t episode_length = 100;
  RewardMode mode = RewardMode::sparse;
  double goal_radius = 0.07;      // success distance in unit coordinates
  double sparse_reward = 0.1;
  double dense_scale = 0.1;
  double damping = 0.8;
  double accel = 0.02;
  double agent_radius_px = 1.5;
  double goal_radius_px = 1.5;
  double goal_intensity = 0.45;

  void validate() const;
};

struct DotReacherState {
  double x = 0.0, y = 0.0;    // agent position in [0,1]^2; x maps to columns, y to rows
  double vx = 0.0, vy = 0.0;
  double gx = 0.0, gy = 0.0;  // goal
  std::size_t t = 0;
};

/// Stacked 8-bit frames [frame_stack, size, size], oldest first. Pixel value
/// v stands for v / 255.
struct Observation {
  std::vector<std::uint8_t> pixels;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool clamped_action = false;
};

/// Point mass chasing a goal dot on a 32x32 canvas.
class DotReacher {
 public:
  explicit DotReacher(DotReacherConfig cfg = {});

  Observation reset(std::uint64_t seed);
  StepResult step(std::array<double, 2> action);

  const DotReacherState& state() const { return state_; }
  /// Replaces the physical state and re-renders every stacked frame.
  void set_state(const DotReacherState& s);
  /// Restores a state together with its frame history (as returned by
  /// observation()), for resuming mid-episode.
  void restore(const DotReacherState& s, const Observation& obs);
  const DotReacherConfig& config() const { return cfg_; }
  /// (x, y, vx, vy, gx, gy).
  std::array<double, 6> proprio() const;
  /// Single anti-aliased frame of the current state, values in [0,1].
  std::vector<double> render() const;
  Observation observation() const;
  double distance() const;
  double reward() const;

  static constexpr std::size_t action_dim = 2;
  static constexpr std::size_t proprio_dim = 6;

 private:
  std::vector<std::uint8_t> render_u8() const;

  DotReacherConfig cfg_;
  DotReacherState state_;
  std::vector<std::vector<std::uint8_t>> frames_;  // oldest first
};

/// Pixel coordinates (row, col) of a unit-square position.
std::array<double, 2> to_pixel(double x, double y, std::size_t size);

}  // namespace alix
