#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alix/dual.hpp"
#include "alix/env.hpp"
#include "alix/lix.hpp"
#include "alix/metrics.hpp"
#include "alix/nn.hpp"
#include "alix/optim.hpp"
#include "alix/rng.hpp"
#include "alix/tensor.hpp"

namespace alix {

struct Transition {
  Observation obs;
  std::vector<double> action;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
  std::vector<double> proprio;
  std::vector<double> next_proprio;
};

/// Sampled minibatch. Pixel tensors are [B, F, H, W] scaled to [0, 1].
struct Batch {
  std::vector<std::size_t> indices;  // logical start indices in the buffer
  Tensor obs, next_obs;
  Tensor proprio, next_proprio;      // [B, P] (empty when the buffer has none)
  Tensor action;                     // [B, A]
  Tensor next_action;                // [B, A] action taken at the bootstrap state (SARSA)
  std::vector<double> ret;           // n-step discounted reward sum (raw rewards)
  std::vector<double> discount;      // gamma^k for the k rewards summed
  std::vector<double> done;          // 1 when the window hit a terminal transition
  std::vector<double> mc_return;     // Monte-Carlo return of the start transition (NaN if unknown)
  bool has_next_action = false;

  std::size_t size() const { return indices.size(); }
};

/// Ring buffer of transitions. An episode ends at a transition with done set.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t frame_stack, std::size_t frame_size);

  void push(Transition t);
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t logical) const;
  std::size_t episode_of(std::size_t logical) const;

  /// Uniform sample over start indices with a complete n-step window (or one
  /// cut short by a terminal). With `need_next_action`, windows that do not
  /// terminate must also have the transition at t+n stored.
  /// Throws InvalidState when no start index qualifies.
  Batch sample_nstep(std::size_t batch_size, std::size_t n, double gamma, Rng& rng, bool need_next_action = false) const;
  /// Same assembly for explicit start indices (which must be valid).
  Batch make_batch(std::span<const std::size_t> indices, std::size_t n, double gamma, bool need_next_action = false) const;
  std::vector<std::size_t> valid_starts(std::size_t n, bool need_next_action) const;

  /// Fills the Monte-Carlo return of every transition that belongs to a
  /// terminated episode; others get NaN.
  void compute_mc_returns(double gamma);
  double mc_return(std::size_t logical) const { return mc_[physical(logical)]; }

  std::size_t frame_stack() const { return frame_stack_; }
  std::size_t frame_size() const { return frame_size_; }

  /// Raw storage access for checkpoints.
  std::vector<Transition> snapshot() const;
  void restore(const std::vector<Transition>& transitions);

 private:
  std::size_t physical(std::size_t logical) const { return (head_ + logical) % capacity_; }

  std::size_t capacity_, frame_stack_, frame_size_;
  std::vector<Transition> data_;
  std::vector<std::uint64_t> episode_;
  std::vector<double> mc_;
  std::size_t head_ = 0, count_ = 0;
  std::uint64_t next_episode_ = 0;
  bool prev_done_ = true;
};

/// Discounted returns of one episode, computed backward.
std::vector<double> monte_carlo_returns(std::span<const double> rewards, double gamma);

/// Welford running mean / variance of scalar samples.
struct RunningStat {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x);
  double variance() const { return n > 1 ? m2 / static_cast<double>(n) : 0.0; }
  double stddev() const;
};

struct AgentConfig {
  EncoderConfig encoder;
  std::size_t action_dim = 2;
  std::size_t proprio_dim = 6;
  std::vector<std::size_t> hidden{256, 256};

  bool use_lix = false;
  bool use_shift_aug = false;
  bool adaptive_S = true;
  bool freeze_encoder = false;
  bool proprioceptive = false;
  bool reward_normalize = false;

  std::size_t n_step = 3;
  double gamma = 0.99;
  double polyak = 0.99;
  AdamConfig optim{1e-4, 0.9, 0.999, 1e-8};
  std::size_t shift_pad = 2;
  ShiftGranularity granularity = ShiftGranularity::per_location;
  DualState dual;
  NDConfig nd;

  /// Throws std::invalid_argument on conflicting flags.
  void validate() const;
};

/// Actor: its own trunk over detached conv features (pixel agents) followed
/// by an MLP and tanh.
struct Actor {
  Tensor trunk_weight, trunk_bias, norm_gain, norm_shift;  // empty for proprioceptive agents
  MLP mlp;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

struct Agent {
  AgentConfig cfg;
  Encoder encoder;         // conv stack + critic trunk
  Encoder target_encoder;  // only the trunk is used (and Polyak-averaged)
  MLP critic, target_critic;
  Actor actor;
  DualState dual;
  Adam critic_opt, actor_opt;
  RunningStat reward_stat;
  Rng rng;

  double reward_scale() const;
  /// Every tensor that defines the agent, for checkpoints.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> critic_parameters() const;
  std::vector<Tensor> target_parameters() const;
};

Agent make_agent(const AgentConfig& cfg, std::uint64_t seed);

struct CriticStats {
  double td_loss = 0.0;
  double nd_lix = 0.0;           // robust ND at the LIX outputs, averaged over layers (0 without LIX)
  double nd_features = 0.0;      // robust ND of the gradient at the final features z
  double nd_features_raw = 0.0;  // plain ND of the same gradient
  double S = 0.0;                // radius after the (optional) dual update
  std::vector<double> q, y, ret;
  Tensor features;               // detached z of the update, reused by the actor
  std::vector<double> feature_grad;  // dLoss/dz, laid out like `features`
};

/// y = R * scale + discount * (1 - done) * Qhat(s', a'), without gradient.
/// a' is the actor's action, or the dataset's next action when `sarsa`.
/// `next_features` are conv features of the bootstrap observations (ignored
/// for proprioceptive agents).
Tensor td_targets(const Agent& agent, const Batch& batch, const Tensor& next_features, bool sarsa);

/// One critic step (encoder + critic); measures robust ND of the feature
/// gradients and, with an adaptive radius, updates S. Targets are left alone.
/// Throws NumericError on a non-finite loss (no parameter changes).
CriticStats critic_update(Agent& agent, const Batch& batch, bool sarsa = false);
/// Polyak-averages the target trunk and critic.
void update_targets(Agent& agent);
/// One actor step on -mean Q(s, pi(s)); encoder gradients are blocked.
/// `features` are detached conv features of batch.obs (pixel agents).
double actor_update(Agent& agent, const Batch& batch, const Tensor& features);

/// Conv features of batch observations as seen during training: shift
/// augmentation and LIX (at the current S) applied per the agent config,
/// drawing from `rng`. No gradient.
Tensor training_features(const Agent& agent, const Tensor& obs, Rng& rng);

/// Gradient of the TD loss with respect to z on `batch`, without updating
/// anything; stochastic layers draw from `rng`. Returns the gradient values
/// (shape of the features).
std::vector<double> feature_gradient(const Agent& agent, const Batch& batch, bool sarsa, Rng& rng);

/// Q(s, a) for the batch without gradient, no LIX or augmentation.
std::vector<double> q_values(const Agent& agent, const Batch& batch);

/// Deterministic policy action (plus optional Gaussian exploration noise).
std::vector<double> act(const Agent& agent, const Observation& obs, std::span<const double> proprio,
                        double noise_std, Rng* rng);

/// Conv features of a pixel batch (no gradient, no LIX).
Tensor encode_no_grad(const Agent& agent, const Tensor& obs);

/// SARSA policy evaluation for `steps` updates. `on_step(step, stats)` is
/// called after every update when set.
void sarsa_policy_evaluation(Agent& agent, const ReplayBuffer& data, std::size_t steps, std::size_t batch_size,
                             const std::function<void(std::size_t, const CriticStats&)>& on_step = {});
/// Trains the actor against the frozen critic for `steps` updates.
void policy_improvement(Agent& agent, const ReplayBuffer& data, std::size_t steps, std::size_t batch_size,
                        const std::function<void(std::size_t, double)>& on_step = {});

/// Uniform-random-action dataset of `n` transitions.
ReplayBuffer collect_random(const DotReacherConfig& env_cfg, std::size_t n, std::uint64_t seed, double gamma);

/// Mean and sample standard deviation of undiscounted episode returns of the
/// deterministic policy over `episodes` fresh episodes.
std::pair<double, double> evaluate_policy(const Agent& agent, const DotReacherConfig& env_cfg, std::size_t episodes,
                                          std::uint64_t seed);

/// Pixel tensor [B, F, H, W] from stored observations.
Tensor pixels_to_tensor(std::span<const Observation* const> obs, std::size_t frame_stack, std::size_t frame_size);

}  // namespace alix
