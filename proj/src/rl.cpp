#include "alix/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "alix/errors.hpp"
#include "alix/ops.hpp"

namespace alix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Tensor vector_tensor(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n, 1}, std::move(v));
}

Tensor rows_tensor(const std::vector<const std::vector<double>*>& rows, std::size_t width) {
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (const auto* r : rows) {
    if (r->size() != width) throw std::invalid_argument("batch rows differ in width");
    out.insert(out.end(), r->begin(), r->end());
  }
  return Tensor({rows.size(), width}, std::move(out));
}

bool is_pixel(const AgentConfig& cfg) { return !cfg.proprioceptive; }

Tensor actor_forward(const Actor& actor, const Tensor& input, bool pixel) {
  Tensor h = input;
  if (pixel)
    h = tanh(layer_norm(linear(flatten(input), actor.trunk_weight, actor.trunk_bias), actor.norm_gain, actor.norm_shift));
  return tanh(mlp_forward(actor.mlp, h));
}

Tensor critic_forward(const Encoder& trunk_owner, const MLP& critic, const Tensor& features, const Tensor& action,
                      bool pixel) {
  Tensor h = pixel ? encode_trunk(trunk_owner, features) : features;
  return mlp_forward(critic, concat_cols({h, action}));
}

std::vector<Tensor> trunk_parameters(const Encoder& e) { return {e.trunk_weight, e.trunk_bias, e.norm_gain, e.norm_shift}; }

double mean_robust_nd(const std::vector<Tensor>& maps, const NDConfig& cfg, Rng& rng) {
  if (maps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& m : maps) {
    if (!m.has_grad()) continue;
    const auto dirs = make_directions(cfg, m.dim(2), m.dim(3), &rng);
    total += robust_nd(m.grad(), m.shape(), dirs, cfg);
  }
  return total / static_cast<double>(maps.size());
}

}  // namespace

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t frame_stack, std::size_t frame_size)
    : capacity_(capacity), frame_stack_(frame_stack), frame_size_(frame_size) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  data_.resize(capacity);
  episode_.assign(capacity, 0);
  mc_.assign(capacity, kNaN);
}

void ReplayBuffer::push(Transition t) {
  const std::size_t pixels = frame_stack_ * frame_size_ * frame_size_;
  if (!t.obs.pixels.empty() && (t.obs.pixels.size() != pixels || t.next_obs.pixels.size() != pixels))
    throw std::invalid_argument("replay: observation size does not match the buffer layout");
  if (prev_done_) ++next_episode_;
  prev_done_ = t.done;
  std::size_t slot;
  if (count_ < capacity_) {
    slot = physical(count_);
    ++count_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % capacity_;
  }
  data_[slot] = std::move(t);
  episode_[slot] = next_episode_;
  mc_[slot] = kNaN;
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
  if (logical >= count_) throw std::out_of_range("replay index out of range");
  return data_[physical(logical)];
}

std::size_t ReplayBuffer::episode_of(std::size_t logical) const { return episode_[physical(logical)]; }

std::vector<std::size_t> ReplayBuffer::valid_starts(std::size_t n, bool need_next_action) const {
  if (n == 0) throw std::invalid_argument("n-step length must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count_; ++i) {
    const auto ep = episode_of(i);
    bool ok = false, terminated = false;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = i + k;
      if (j >= count_ || episode_of(j) != ep) break;
      if (at(j).done) {
        terminated = true;
        break;
      }
      if (k + 1 == n) ok = true;
    }
    if (terminated) {
      out.push_back(i);
      continue;
    }
    if (ok && need_next_action) ok = i + n < count_ && episode_of(i + n) == ep;
    if (ok) out.push_back(i);
  }
  return out;
}

Batch ReplayBuffer::make_batch(std::span<const std::size_t> indices, std::size_t n, double gamma,
                               bool need_next_action) const {
  if (n == 0) throw std::invalid_argument("n-step length must be >= 1");
  Batch b;
  b.has_next_action = need_next_action;
  std::vector<const Observation*> obs, next_obs;
  std::vector<const std::vector<double>*> act, next_act, prop, next_prop;
  const std::vector<double>* zero_action = nullptr;
  std::vector<double> zeros;
  for (std::size_t i : indices) {
    const auto ep = episode_of(i);
    double R = 0.0, disc = 1.0;
    bool done = false;
    std::size_t last = i;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = i + k;
      if (j >= count_ || episode_of(j) != ep)
        throw std::invalid_argument("make_batch: start index " + std::to_string(i) + " has no complete window");
      R += disc * at(j).reward;
      disc *= gamma;
      last = j;
      if (at(j).done) {
        done = true;
        break;
      }
    }
    b.indices.push_back(i);
    b.ret.push_back(R);
    b.discount.push_back(disc);
    b.done.push_back(done ? 1.0 : 0.0);
    b.mc_return.push_back(mc_return(i));
    obs.push_back(&at(i).obs);
    next_obs.push_back(&at(last).next_obs);
    act.push_back(&at(i).action);
    prop.push_back(&at(i).proprio);
    next_prop.push_back(&at(last).next_proprio);
    if (need_next_action) {
      if (done) {
        if (!zero_action) {
          zeros.assign(at(i).action.size(), 0.0);
          zero_action = &zeros;
        }
        next_act.push_back(zero_action);
      } else {
        if (i + n >= count_ || episode_of(i + n) != ep)
          throw std::invalid_argument("make_batch: next action missing for start index " + std::to_string(i));
        next_act.push_back(&at(i + n).action);
      }
    }
  }
  const std::size_t A = act.front()->size();
  if (!obs.front()->pixels.empty()) {
    b.obs = pixels_to_tensor(obs, frame_stack_, frame_size_);
    b.next_obs = pixels_to_tensor(next_obs, frame_stack_, frame_size_);
  }
  if (!prop.front()->empty()) {
    b.proprio = rows_tensor(prop, prop.front()->size());
    b.next_proprio = rows_tensor(next_prop, prop.front()->size());
  }
  b.action = rows_tensor(act, A);
  if (need_next_action) b.next_action = rows_tensor(next_act, A);
  return b;
}

Batch ReplayBuffer::sample_nstep(std::size_t batch_size, std::size_t n, double gamma, Rng& rng,
                                 bool need_next_action) const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (count_ < n) throw InvalidState("replay: buffer holds fewer transitions than n");
  const auto valid = valid_starts(n, need_next_action);
  if (valid.empty()) throw InvalidState("replay: no valid n-step start index");
  std::vector<std::size_t> picks(batch_size);
  for (auto& p : picks) p = valid[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(valid.size()) - 1))];
  return make_batch(picks, n, gamma, need_next_action);
}

void ReplayBuffer::compute_mc_returns(double gamma) {
  std::size_t i = 0;
  while (i < count_) {
    std::size_t j = i;
    while (j + 1 < count_ && episode_of(j + 1) == episode_of(i)) ++j;
    if (at(j).done) {
      std::vector<double> rewards;
      for (std::size_t k = i; k <= j; ++k) rewards.push_back(at(k).reward);
      const auto ret = monte_carlo_returns(rewards, gamma);
      for (std::size_t k = i; k <= j; ++k) mc_[physical(k)] = ret[k - i];
    } else {
      for (std::size_t k = i; k <= j; ++k) mc_[physical(k)] = kNaN;
    }
    i = j + 1;
  }
}

std::vector<Transition> ReplayBuffer::snapshot() const {
  std::vector<Transition> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) out.push_back(at(i));
  return out;
}

void ReplayBuffer::restore(const std::vector<Transition>& transitions) {
  *this = ReplayBuffer(capacity_, frame_stack_, frame_size_);
  for (const auto& t : transitions) push(t);
}

Tensor pixels_to_tensor(std::span<const Observation* const> obs, std::size_t frame_stack, std::size_t frame_size) {
  const std::size_t per = frame_stack * frame_size * frame_size;
  std::vector<double> v(obs.size() * per);
  for (std::size_t b = 0; b < obs.size(); ++b) {
    const auto& px = obs[b]->pixels;
    if (px.size() != per) throw std::invalid_argument("pixels_to_tensor: observation size mismatch");
    for (std::size_t k = 0; k < per; ++k) v[b * per + k] = static_cast<double>(px[k]) / 255.0;
  }
  return Tensor({obs.size(), frame_stack, frame_size, frame_size}, std::move(v));
}

std::vector<double> monte_carlo_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

void RunningStat::push(double x) {
  ++n;
  const double d = x - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (x - mean);
}

double RunningStat::stddev() const { return std::max(std::sqrt(variance()), 1e-6); }

// ---------------------------------------------------------------- agent

void AgentConfig::validate() const {
  if (proprioceptive && (use_lix || use_shift_aug))
    throw std::invalid_argument("agent config: proprioceptive excludes lix and shift augmentation");
  if (n_step == 0) throw std::invalid_argument("agent config: n_step must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("agent config: gamma must lie in (0, 1]");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw std::invalid_argument("agent config: polyak must lie in [0, 1]");
  if (action_dim == 0) throw std::invalid_argument("agent config: action_dim must be positive");
  if (proprioceptive && proprio_dim == 0) throw std::invalid_argument("agent config: proprio_dim must be positive");
  if (!proprioceptive) encoder.validate();
  dual.validate();
}

std::vector<Tensor> Actor::parameters() const {
  std::vector<Tensor> p;
  if (trunk_weight.defined()) p = {trunk_weight, trunk_bias, norm_gain, norm_shift};
  auto m = mlp.parameters();
  p.insert(p.end(), m.begin(), m.end());
  return p;
}

std::vector<std::pair<std::string, Tensor>> Actor::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> p;
  if (trunk_weight.defined()) {
    p.emplace_back("actor.trunk.weight", trunk_weight);
    p.emplace_back("actor.trunk.bias", trunk_bias);
    p.emplace_back("actor.norm.gain", norm_gain);
    p.emplace_back("actor.norm.shift", norm_shift);
  }
  auto m = mlp.named_parameters("actor");
  p.insert(p.end(), m.begin(), m.end());
  return p;
}

double Agent::reward_scale() const { return cfg.reward_normalize ? 1.0 / reward_stat.stddev() : 1.0; }

std::vector<Tensor> Agent::critic_parameters() const {
  std::vector<Tensor> p;
  if (is_pixel(cfg)) {
    if (!cfg.freeze_encoder)
      for (std::size_t i = 0; i < encoder.conv_weight.size(); ++i) {
        p.push_back(encoder.conv_weight[i]);
        p.push_back(encoder.conv_bias[i]);
      }
    auto t = trunk_parameters(encoder);
    p.insert(p.end(), t.begin(), t.end());
  }
  auto c = critic.parameters();
  p.insert(p.end(), c.begin(), c.end());
  return p;
}

std::vector<Tensor> Agent::target_parameters() const {
  std::vector<Tensor> p;
  if (is_pixel(cfg)) p = trunk_parameters(target_encoder);
  auto c = target_critic.parameters();
  p.insert(p.end(), c.begin(), c.end());
  return p;
}

std::vector<std::pair<std::string, Tensor>> Agent::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (is_pixel(cfg)) {
    for (auto& [n, t] : encoder.named_parameters()) out.emplace_back("encoder." + n, t);
    for (auto& [n, t] : target_encoder.named_parameters()) out.emplace_back("target_encoder." + n, t);
  }
  for (auto& e : critic.named_parameters("critic")) out.push_back(e);
  for (auto& e : target_critic.named_parameters("target_critic")) out.push_back(e);
  for (auto& e : actor.named_parameters()) out.push_back(e);
  return out;
}

Agent make_agent(const AgentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Agent a;
  a.cfg = cfg;
  a.dual = cfg.dual;
  Rng init = Rng(seed).split(1);
  a.rng = Rng(seed).split(2);
  const bool pixel = is_pixel(cfg);
  std::size_t critic_in = cfg.action_dim, actor_in = 0;
  if (pixel) {
    a.encoder = build_encoder(cfg.encoder, init);
    a.target_encoder = clone(a.encoder);
    critic_in += cfg.encoder.trunk_dim;
    actor_in = cfg.encoder.trunk_dim;
    const std::size_t flat = shape_numel(cfg.encoder.feature_shape());
    const std::size_t td = cfg.encoder.trunk_dim;
    a.actor.trunk_weight = Tensor({td, flat}, orthogonal_init(td, flat, 1.0, init), true);
    a.actor.trunk_bias = Tensor({td}, 0.0, true);
    a.actor.norm_gain = Tensor({td}, 1.0, true);
    a.actor.norm_shift = Tensor({td}, 0.0, true);
  } else {
    critic_in += cfg.proprio_dim;
    actor_in = cfg.proprio_dim;
  }
  std::vector<std::size_t> csizes{critic_in}, asizes{actor_in};
  for (auto h : cfg.hidden) csizes.push_back(h), asizes.push_back(h);
  csizes.push_back(1);
  asizes.push_back(cfg.action_dim);
  a.critic = build_mlp(csizes, init);
  a.target_critic = clone(a.critic);
  a.actor.mlp = build_mlp(asizes, init);

  if (pixel && cfg.freeze_encoder)
    for (std::size_t i = 0; i < a.encoder.conv_weight.size(); ++i) {
      a.encoder.conv_weight[i].set_requires_grad(false);
      a.encoder.conv_bias[i].set_requires_grad(false);
    }
  auto targets = a.target_parameters();
  set_requires_grad(targets, false);
  if (pixel) {
    // Conv weights of the target copy are never read.
    for (auto& t : a.target_encoder.conv_weight) t.set_requires_grad(false);
    for (auto& t : a.target_encoder.conv_bias) t.set_requires_grad(false);
  }
  a.critic_opt = Adam(a.critic_parameters(), cfg.optim);
  a.actor_opt = Adam(a.actor.parameters(), cfg.optim);
  return a;
}

Tensor encode_no_grad(const Agent& agent, const Tensor& obs) {
  NoGradGuard g;
  return encode_features(agent.encoder, obs).features;
}

Tensor training_features(const Agent& agent, const Tensor& obs, Rng& rng) {
  NoGradGuard g;
  Tensor x = agent.cfg.use_shift_aug ? random_shift_aug(obs, agent.cfg.shift_pad, rng) : obs;
  if (!agent.cfg.use_lix) return encode_features(agent.encoder, x).features;
  LixContext ctx{agent.dual.S, &rng, agent.cfg.granularity};
  return encode_features(agent.encoder, x, &ctx).features;
}

Tensor td_targets(const Agent& agent, const Batch& batch, const Tensor& next_features, bool sarsa) {
  NoGradGuard g;
  const bool pixel = is_pixel(agent.cfg);
  const Tensor& next_in = pixel ? next_features : batch.next_proprio;
  if (sarsa && !batch.has_next_action) throw std::invalid_argument("td_targets: SARSA batch lacks next actions");
  Tensor next_action = sarsa ? batch.next_action : actor_forward(agent.actor, next_in, pixel);
  Tensor q_next = critic_forward(agent.target_encoder, agent.target_critic, next_in, next_action, pixel);
  if (q_next.dim(0) != batch.size()) throw std::invalid_argument("td_targets: batch size mismatch");
  const double scale = agent.reward_scale();
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = batch.ret[i] * scale + batch.discount[i] * (1.0 - batch.done[i]) * q_next.values()[i];
  return vector_tensor(std::move(y));
}

namespace {

struct Forward {
  Tensor loss, q, y, features;
  std::vector<Tensor> lix_outputs;
};

// Online TD forward pass shared by critic_update and feature_gradient.
Forward td_forward(const Agent& agent, const Batch& batch, bool sarsa, Rng& rng) {
  const bool pixel = is_pixel(agent.cfg);
  Forward f;
  Tensor next_features;
  Tensor obs = batch.obs;
  if (pixel) {
    next_features = training_features(agent, batch.next_obs, rng);
    if (agent.cfg.use_shift_aug) obs = random_shift_aug(obs, agent.cfg.shift_pad, rng);
  }
  f.y = td_targets(agent, batch, next_features, sarsa);
  if (pixel) {
    LixContext ctx{agent.dual.S, &rng, agent.cfg.granularity};
    EncoderOutput out = encode_features(agent.encoder, obs, agent.cfg.use_lix ? &ctx : nullptr);
    f.features = out.features;
    if (!f.features.requires_grad()) {
      // Frozen conv stack: cut here so the feature gradient is still recorded.
      f.features = f.features.detach();
      f.features.set_requires_grad(true);
    }
    f.lix_outputs = std::move(out.lix_outputs);
    f.q = critic_forward(agent.encoder, agent.critic, f.features, batch.action, true);
  } else {
    f.q = critic_forward(agent.encoder, agent.critic, batch.proprio, batch.action, false);
  }
  f.loss = mse_loss(f.q, f.y);
  return f;
}

}  // namespace

CriticStats critic_update(Agent& agent, const Batch& batch, bool sarsa) {
  auto params = agent.critic_parameters();
  zero_grad(params);
  Forward f = td_forward(agent, batch, sarsa, agent.rng);
  const double loss = f.loss.item();
  if (!std::isfinite(loss)) throw NumericError("critic_update: non-finite TD loss; step skipped");
  backward(f.loss);

  CriticStats s;
  s.td_loss = loss;
  s.q.assign(f.q.values().begin(), f.q.values().end());
  s.y.assign(f.y.values().begin(), f.y.values().end());
  s.ret = batch.ret;
  if (is_pixel(agent.cfg)) {
    s.nd_lix = mean_robust_nd(f.lix_outputs, agent.cfg.nd, agent.rng);
    if (f.features.has_grad()) {
      const auto dirs = make_directions(agent.cfg.nd, f.features.dim(2), f.features.dim(3), &agent.rng);
      s.nd_features = robust_nd(f.features.grad(), f.features.shape(), dirs, agent.cfg.nd);
      s.nd_features_raw = nd_score(f.features.grad(), f.features.shape(), dirs, agent.cfg.nd);
      s.feature_grad.assign(f.features.grad().begin(), f.features.grad().end());
    }
    s.features = f.features.detach();
  }
  agent.critic_opt.step();
  if (agent.cfg.use_lix && agent.cfg.adaptive_S && !f.lix_outputs.empty()) dual_update(agent.dual, s.nd_lix);
  s.S = agent.cfg.use_lix ? agent.dual.S : 0.0;
  return s;
}

void update_targets(Agent& agent) {
  auto target = agent.target_parameters();
  std::vector<Tensor> online;
  if (is_pixel(agent.cfg)) online = trunk_parameters(agent.encoder);
  auto c = agent.critic.parameters();
  online.insert(online.end(), c.begin(), c.end());
  polyak_update(target, online, agent.cfg.polyak);
}

double actor_update(Agent& agent, const Batch& batch, const Tensor& features) {
  const bool pixel = is_pixel(agent.cfg);
  Tensor in = pixel ? features.detach() : batch.proprio;
  // Critic parameters must not collect gradient here; freeze them for the pass.
  auto critic_params = agent.critic_parameters();
  std::vector<bool> flags;
  for (auto& p : critic_params) flags.push_back(p.requires_grad()), p.set_requires_grad(false);
  agent.actor_opt.zero_grad();
  Tensor action = actor_forward(agent.actor, in, pixel);
  Tensor q = critic_forward(agent.encoder, agent.critic, in, action, pixel);
  Tensor loss = neg(mean(q));
  const double value = loss.item();
  for (std::size_t i = 0; i < critic_params.size(); ++i) critic_params[i].set_requires_grad(flags[i]);
  if (!std::isfinite(value)) throw NumericError("actor_update: non-finite policy loss; step skipped");
  backward(loss);
  agent.actor_opt.step();
  return value;
}

std::vector<double> feature_gradient(const Agent& agent, const Batch& batch, bool sarsa, Rng& rng) {
  if (!is_pixel(agent.cfg)) throw std::invalid_argument("feature_gradient: agent has no pixel encoder");
  auto params = agent.critic_parameters();
  Forward f = td_forward(agent, batch, sarsa, rng);
  backward(f.loss);
  std::vector<double> g(f.features.grad().begin(), f.features.grad().end());
  zero_grad(params);
  return g;
}

std::vector<double> q_values(const Agent& agent, const Batch& batch) {
  NoGradGuard g;
  const bool pixel = is_pixel(agent.cfg);
  Tensor in = pixel ? encode_features(agent.encoder, batch.obs).features : batch.proprio;
  Tensor q = critic_forward(agent.encoder, agent.critic, in, batch.action, pixel);
  return {q.values().begin(), q.values().end()};
}

std::vector<double> act(const Agent& agent, const Observation& obs, std::span<const double> proprio, double noise_std,
                        Rng* rng) {
  NoGradGuard g;
  const bool pixel = is_pixel(agent.cfg);
  Tensor in;
  if (pixel) {
    const Observation* p = &obs;
    const auto& ec = agent.cfg.encoder;
    in = encode_features(agent.encoder, pixels_to_tensor(std::span(&p, 1), ec.channels_in, ec.input_height)).features;
  } else {
    in = Tensor({1, proprio.size()}, std::vector<double>(proprio.begin(), proprio.end()));
  }
  Tensor a = actor_forward(agent.actor, in, pixel);
  std::vector<double> out(a.values().begin(), a.values().end());
  if (noise_std > 0.0) {
    if (!rng) throw std::invalid_argument("act: exploration noise needs an RNG");
    for (auto& v : out) v = std::clamp(v + noise_std * rng->normal(), -1.0, 1.0);
  }
  return out;
}

void sarsa_policy_evaluation(Agent& agent, const ReplayBuffer& data, std::size_t steps, std::size_t batch_size,
                             const std::function<void(std::size_t, const CriticStats&)>& on_step) {
  if (agent.cfg.reward_normalize && agent.reward_stat.n == 0)
    for (std::size_t i = 0; i < data.size(); ++i) agent.reward_stat.push(data.at(i).reward);
  for (std::size_t t = 0; t < steps; ++t) {
    Batch b = data.sample_nstep(batch_size, agent.cfg.n_step, agent.cfg.gamma, agent.rng, true);
    CriticStats s = critic_update(agent, b, true);
    update_targets(agent);
    if (on_step) on_step(t, s);
  }
}

void policy_improvement(Agent& agent, const ReplayBuffer& data, std::size_t steps, std::size_t batch_size,
                        const std::function<void(std::size_t, double)>& on_step) {
  for (std::size_t t = 0; t < steps; ++t) {
    Batch b = data.sample_nstep(batch_size, 1, agent.cfg.gamma, agent.rng);
    Tensor feats = is_pixel(agent.cfg) ? training_features(agent, b.obs, agent.rng) : Tensor();
    const double loss = actor_update(agent, b, feats);
    if (on_step) on_step(t, loss);
  }
}

ReplayBuffer collect_random(const DotReacherConfig& env_cfg, std::size_t n, std::uint64_t seed, double gamma) {
  DotReacher env(env_cfg);
  ReplayBuffer buf(std::max<std::size_t>(n, 1), env_cfg.frame_stack, env_cfg.size);
  Rng rng(seed);
  Rng episodes = Rng(seed).split(7);
  Observation obs = env.reset(episodes.next());
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = env.proprio();
    Transition t;
    t.obs = obs;
    t.proprio.assign(p.begin(), p.end());
    t.action = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    StepResult r = env.step({t.action[0], t.action[1]});
    t.reward = r.reward;
    t.done = r.done;
    t.next_obs = r.obs;
    const auto np = env.proprio();
    t.next_proprio.assign(np.begin(), np.end());
    buf.push(std::move(t));
    obs = r.done ? env.reset(episodes.next()) : std::move(r.obs);
  }
  buf.compute_mc_returns(gamma);
  return buf;
}

std::pair<double, double> evaluate_policy(const Agent& agent, const DotReacherConfig& env_cfg, std::size_t episodes,
                                          std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("evaluate_policy: need at least one episode");
  DotReacher env(env_cfg);
  Rng seeds(seed);
  std::vector<double> returns;
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation obs = env.reset(seeds.next());
    double total = 0.0;
    bool done = false;
    while (!done) {
      const auto p = env.proprio();
      const auto a = act(agent, obs, p, 0.0, nullptr);
      StepResult r = env.step({a[0], a[1]});
      total += r.reward;
      done = r.done;
      obs = std::move(r.obs);
    }
    returns.push_back(total);
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  const double sd = returns.size() > 1 ? std::sqrt(var / static_cast<double>(returns.size() - 1)) : 0.0;
  return {mean, sd};
}

}  // namespace alix
