#include "alix/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "alix/checkpoint.hpp"
#include "alix/errors.hpp"
#include "alix/metrics.hpp"
#include "alix/ops.hpp"

namespace fs = std::filesystem;

namespace alix {

namespace {

// Independent streams per seed; the dataset stream does not depend on the
// agent config so every row of a sweep sees the same data.
enum Stream : std::uint64_t { kData = 101, kInit = 102, kDiag = 103, kEval = 104, kNd = 105, kEpisodes = 201, kExplore = 202 };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) { return Rng(seed).split(s).next(); }

std::optional<double> mean_of(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Accumulates per-step quantities between two metrics rows.
struct Window {
  double td = 0, zero = 0, nonzero = 0, qsum = 0, nd_raw = 0, nd_rob = 0, policy = 0, ret = 0;
  std::size_t n_td = 0, n_zero = 0, n_nonzero = 0, n_q = 0, n_nd = 0, n_policy = 0, n_ret = 0;
  std::vector<double> q, y;

  void add_critic(const CriticStats& s, bool pixel) {
    td += s.td_loss;
    ++n_td;
    for (std::size_t i = 0; i < s.q.size(); ++i) {
      const double e = (s.q[i] - s.y[i]) * (s.q[i] - s.y[i]);
      if (s.ret[i] == 0.0) {
        zero += e;
        ++n_zero;
      } else {
        nonzero += e;
        ++n_nonzero;
      }
      qsum += s.q[i];
      ++n_q;
    }
    q.insert(q.end(), s.q.begin(), s.q.end());
    y.insert(y.end(), s.y.begin(), s.y.end());
    if (pixel) {
      nd_raw += s.nd_features_raw;
      nd_rob += s.nd_features;
      ++n_nd;
    }
  }
};

// Fixed offline transitions probed at every tick: a batch with Monte-Carlo
// returns, plus reward-stratified sets for the zero / non-zero TD split.
struct Diagnostics {
  Batch batch;
  Batch zero, nonzero;
  bool valid = false;
};

Diagnostics make_diagnostics(const ReplayBuffer& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  Diagnostics d;
  const std::size_t n = cfg.agent.n_step;
  const auto starts = data.valid_starts(n, true);
  std::vector<std::size_t> pool;
  for (auto i : starts)
    if (std::isfinite(data.mc_return(i))) pool.push_back(i);
  if (pool.size() < 2) return d;
  Rng rng(stream_seed(seed, kDiag));
  std::vector<std::size_t> idx(std::min(cfg.diag_batch, pool.size()));
  for (auto& i : idx) i = pool[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(pool.size()) - 1))];
  d.batch = data.make_batch(idx, n, cfg.agent.gamma, true);
  d.valid = true;

  std::vector<std::size_t> zero, nonzero;
  for (auto i : starts) {
    bool rewarded = false;
    for (std::size_t k = 0; k < n && i + k < data.size(); ++k) {
      rewarded = rewarded || data.at(i + k).reward != 0.0;
      if (data.at(i + k).done) break;
    }
    (rewarded ? nonzero : zero).push_back(i);
  }
  Rng split = Rng(stream_seed(seed, kDiag)).split(2);
  auto pick = [&](const std::vector<std::size_t>& from) {
    std::vector<std::size_t> out(std::min(std::max<std::size_t>(cfg.diag_batch / 2, 1), from.size()));
    for (auto& i : out) i = from[static_cast<std::size_t>(split.integer(0, static_cast<std::int64_t>(from.size()) - 1))];
    return out;
  };
  if (auto z = pick(zero); !z.empty()) d.zero = data.make_batch(z, n, cfg.agent.gamma, true);
  if (auto nz = pick(nonzero); !nz.empty()) d.nonzero = data.make_batch(nz, n, cfg.agent.gamma, true);
  return d;
}

Tensor sarsa_targets(const Agent& agent, const Batch& b) {
  const bool pixel = !agent.cfg.proprioceptive;
  return td_targets(agent, b, pixel ? encode_no_grad(agent, b.next_obs) : Tensor(), true);
}

double fixed_td_loss(const Agent& agent, const Batch& b) {
  const auto q = q_values(agent, b);
  const Tensor y = sarsa_targets(agent, b);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += (q[i] - y.values()[i]) * (q[i] - y.values()[i]);
  return s / static_cast<double>(q.size());
}

// Offline rows report Q statistics, Pearson(Q, y) and the TD split on the
// fixed transitions rather than the training window.
void fill_diagnostics(MetricsRow& row, const Agent& agent, const Diagnostics& d) {
  if (!d.valid) return;
  const auto q = q_values(agent, d.batch);
  double s = 0;
  for (double v : q) s += v;
  row.q_mean = s / static_cast<double>(q.size());
  row.pearson_mc = pearson(q, d.batch.mc_return);
  const Tensor y = sarsa_targets(agent, d.batch);
  row.pearson_target = pearson(q, std::vector<double>(y.values().begin(), y.values().end()));
  row.td_loss_zero_reward = d.zero.size() ? std::optional(fixed_td_loss(agent, d.zero)) : std::nullopt;
  row.td_loss_nonzero_reward = d.nonzero.size() ? std::optional(fixed_td_loss(agent, d.nonzero)) : std::nullopt;
}

std::string write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  const std::string text = j.dump(2) + "\n";
  out << text;
  return text;
}

std::string substitute_seed(std::string path, std::uint64_t seed) {
  const std::string token = "{seed}";
  for (auto p = path.find(token); p != std::string::npos; p = path.find(token)) path.replace(p, token.size(), std::to_string(seed));
  return path;
}

void load_pretrained_conv(Agent& agent, const std::string& path) {
  const CheckpointData d = read_checkpoint(path);
  std::vector<std::pair<Tensor, const StoredTensor*>> pairs;
  for (auto& [name, t] : agent.encoder.named_parameters()) {
    if (name.rfind("conv", 0) != 0) continue;
    auto it = d.tensors.find("param.encoder." + name);
    if (it == d.tensors.end() || it->second.shape != t.shape())
      throw UsageError("agent.pretrained_encoder: " + path + " lacks a matching encoder." + name);
    pairs.emplace_back(t, &it->second);
  }
  for (auto& [t, s] : pairs) std::copy(s->values.begin(), s->values.end(), t.values_mut().begin());
}

std::string doubles_blob(const std::vector<double>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::vector<double> blob_doubles(const std::string& b) {
  if (b.size() % sizeof(double) != 0) throw IntegrityError("checkpoint: malformed numeric blob");
  std::vector<double> v(b.size() / sizeof(double));
  std::memcpy(v.data(), b.data(), b.size());
  return v;
}

const std::string& blob(const CheckpointData& d, const std::string& name) {
  auto it = d.blobs.find(name);
  if (it == d.blobs.end()) throw IntegrityError("checkpoint: missing " + name);
  return it->second;
}

// Shared state of one seed's run, in the form a checkpoint captures.
struct RunState {
  std::uint64_t step = 0;
  GradEMAState ema;
  Rng nd_rng;
  // online only
  std::optional<ReplayBuffer> replay;
  DotReacherState env_state;
  Observation obs;
  double episode_return = 0.0;
  Rng episodes, explore;
};

std::map<std::string, std::string> state_blobs(const RunState& s, bool online) {
  std::map<std::string, std::string> b;
  b["step"] = std::to_string(s.step);
  b["ema.values"] = doubles_blob(s.ema.ema);
  std::vector<double> shape(s.ema.shape.begin(), s.ema.shape.end());
  b["ema.shape"] = doubles_blob(shape);
  b["ema.initialized"] = s.ema.initialized ? "1" : "0";
  b["rng.nd"] = s.nd_rng.serialize();
  if (online) {
    b["replay"] = encode_replay(*s.replay);
    const auto& e = s.env_state;
    b["env.state"] = doubles_blob({e.x, e.y, e.vx, e.vy, e.gx, e.gy, static_cast<double>(e.t)});
    b["env.obs"] = std::string(s.obs.pixels.begin(), s.obs.pixels.end());
    b["episode_return"] = doubles_blob({s.episode_return});
    b["rng.episodes"] = s.episodes.serialize();
    b["rng.explore"] = s.explore.serialize();
  }
  return b;
}

void restore_state(RunState& s, const CheckpointData& d, bool online) {
  s.step = std::stoull(blob(d, "step"));
  s.ema.ema = blob_doubles(blob(d, "ema.values"));
  auto shape = blob_doubles(blob(d, "ema.shape"));
  s.ema.shape.assign(shape.begin(), shape.end());
  s.ema.initialized = blob(d, "ema.initialized") == "1";
  s.nd_rng = Rng::deserialize(blob(d, "rng.nd"));
  if (online) {
    s.replay = decode_replay(blob(d, "replay"));
    auto e = blob_doubles(blob(d, "env.state"));
    if (e.size() != 7) throw IntegrityError("checkpoint: malformed env state");
    s.env_state = {e[0], e[1], e[2], e[3], e[4], e[5], static_cast<std::size_t>(e[6])};
    const auto& px = blob(d, "env.obs");
    s.obs.pixels.assign(px.begin(), px.end());
    s.episode_return = blob_doubles(blob(d, "episode_return")).at(0);
    s.episodes = Rng::deserialize(blob(d, "rng.episodes"));
    s.explore = Rng::deserialize(blob(d, "rng.explore"));
  }
}

class SeedRun {
 public:
  SeedRun(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts)
      : cfg_(cfg), seed_(seed), opts_(opts), dir_(seed_directory(cfg, seed)), pixel_(!cfg.agent.proprioceptive) {
    state_.ema = GradEMAState(cfg.nd_ema_decay);
    state_.nd_rng = Rng(stream_seed(seed, kNd));
  }

  SeedResult run() {
    SeedResult res;
    res.seed = seed_;
    res.dir = dir_;
    fs::create_directories(dir_);
    nlohmann::json resolved = to_json(cfg_);
    resolved["run"]["seeds"] = {seed_};
    config_json_ = resolved.dump();
    write_json(dir_ + "/config.json", resolved);

    agent_ = make_agent(cfg_.agent, stream_seed(seed_, kInit));
    if (!cfg_.pretrained_encoder.empty()) load_pretrained_conv(agent_, substitute_seed(cfg_.pretrained_encoder, seed_));

    summary_ = nlohmann::json::object();
    summary_["seed"] = seed_;
    summary_["mode"] = to_string(cfg_.mode);
    summary_["name"] = cfg_.name;
    try {
      if (cfg_.mode == RunMode::online)
        run_online();
      else
        run_offline();
      summary_["status"] = "ok";
    } catch (const NumericError& e) {
      res.ok = false;
      res.error = e.what();
      summary_["status"] = "failed";
      summary_["error"] = e.what();
    }
    summary_["steps_completed"] = state_.step;
    if (stopped_) summary_["status"] = res.ok ? "stopped" : "failed";
    write_json(dir_ + "/summary.json", summary_);
    res.rows = rows_;
    res.summary = summary_;
    return res;
  }

 private:
  void log(const std::string& msg) const {
    if (opts_.log) opts_.log(cfg_.name + " seed " + std::to_string(seed_) + ": " + msg);
  }

  // Opens metrics.csv; when resuming keeps the rows up to the resume step.
  void open_metrics(bool resuming) {
    const std::string path = dir_ + "/metrics.csv";
    if (resuming && fs::exists(path)) {
      auto old = read_metrics(path);
      std::erase_if(old, [&](const MetricsRow& r) { return r.step > state_.step; });
      write_metrics(path, old);
      writer_ = MetricsWriter(path, true);
    } else {
      writer_ = MetricsWriter(path);
    }
  }

  void emit(MetricsRow row) {
    writer_.write(row);
    writer_.flush();
    rows_.push_back(std::move(row));
  }

  void checkpoint(const std::string& file) {
    save_checkpoint(dir_ + "/" + file, agent_, config_json_, state_blobs(state_, cfg_.mode == RunMode::online));
  }

  // Checkpoint cadence and the optional stop; returns true when the run must stop.
  bool after_tick() {
    const auto t = state_.step;
    if (cfg_.checkpoint_every > 0 && t % cfg_.checkpoint_every == 0) checkpoint("step_" + std::to_string(t) + ".ckpt");
    if (opts_.stop_at && t >= *opts_.stop_at) {
      if (cfg_.checkpoint_every == 0 || t % cfg_.checkpoint_every != 0) checkpoint("step_" + std::to_string(t) + ".ckpt");
      stopped_ = true;
      log("stopped at step " + std::to_string(t));
      return true;
    }
    return false;
  }

  std::optional<double> accumulate_nd(const CriticStats& s) {
    if (!pixel_ || s.feature_grad.empty()) return std::nullopt;
    const Shape& shape = s.features.shape();
    const auto dirs = make_directions(cfg_.agent.nd, shape[2], shape[3], &state_.nd_rng);
    return accumulated_nd(state_.ema, s.feature_grad, shape, dirs, cfg_.agent.nd);
  }

  MetricsRow window_row(const Window& w) const {
    MetricsRow r;
    r.step = state_.step;
    r.td_loss = mean_of(w.td, w.n_td);
    r.td_loss_zero_reward = mean_of(w.zero, w.n_zero);
    r.td_loss_nonzero_reward = mean_of(w.nonzero, w.n_nonzero);
    if (w.q.size() >= 2) r.pearson_target = pearson(w.q, w.y);
    r.nd_instant = mean_of(w.nd_raw, w.n_nd);
    r.nd_robust = mean_of(w.nd_rob, w.n_nd);
    r.policy_loss = mean_of(w.policy, w.n_policy);
    r.episode_return = mean_of(w.ret, w.n_ret);
    if (cfg_.agent.use_lix) r.S = agent_.dual.S;
    return r;
  }

  void run_offline() {
    const ReplayBuffer data = collect_random(cfg_.env, cfg_.dataset_size, stream_seed(seed_, kData), cfg_.agent.gamma);
    const Diagnostics diag = make_diagnostics(data, cfg_, seed_);
    if (cfg_.agent.reward_normalize)
      for (std::size_t i = 0; i < data.size(); ++i) agent_.reward_stat.push(data.at(i).reward);

    const bool resuming = !opts_.resume_from.empty();
    if (resuming) {
      const CheckpointData d = read_checkpoint(opts_.resume_from);
      restore_agent(agent_, d);
      restore_state(state_, d, false);
      log("resumed at step " + std::to_string(state_.step));
    }
    open_metrics(resuming);
    if (!resuming) {
      MetricsRow init;
      init.step = 0;
      fill_diagnostics(init, agent_, diag);
      if (cfg_.agent.use_lix) init.S = agent_.dual.S;
      emit(init);
    }

    const std::uint64_t E = cfg_.eval_steps;
    const std::uint64_t I = cfg_.mode == RunMode::probe ? 0 : cfg_.improve_steps;
    Window w;
    std::optional<double> acc;
    while (state_.step < E + I) {
      const std::uint64_t t = ++state_.step;
      if (t <= E) {
        Batch b = data.sample_nstep(cfg_.batch_size, cfg_.agent.n_step, cfg_.agent.gamma, agent_.rng, true);
        CriticStats s = critic_update(agent_, b, true);
        update_targets(agent_);
        w.add_critic(s, pixel_);
        if (auto v = accumulate_nd(s)) acc = v;
      } else {
        Batch b = data.sample_nstep(cfg_.batch_size, 1, cfg_.agent.gamma, agent_.rng);
        Tensor feats = pixel_ ? training_features(agent_, b.obs, agent_.rng) : Tensor();
        w.policy += actor_update(agent_, b, feats);
        ++w.n_policy;
      }
      if (t % cfg_.metrics_every == 0 || t == E || t == E + I) {
        MetricsRow row = window_row(w);
        fill_diagnostics(row, agent_, diag);
        if (t <= E) row.nd_accumulated = acc;
        if (t == E + I && I > 0) {
          final_eval_ = evaluate_policy(agent_, cfg_.env, cfg_.eval_episodes, stream_seed(seed_, kEval));
          row.episode_return = final_eval_->first;
        }
        emit(row);
        w = Window{};
        if (after_tick()) return;
      }
    }

    if (cfg_.mode == RunMode::probe) run_probe(diag);
    if (!final_eval_) final_eval_ = evaluate_policy(agent_, cfg_.env, cfg_.eval_episodes, stream_seed(seed_, kEval));
    auto [mean, sd] = *final_eval_;
    summary_["return_mean"] = mean;
    summary_["return_sd"] = sd;
    summarize_rows();
    checkpoint("final.ckpt");
  }

  void run_probe(const Diagnostics& diag) {
    if (!pixel_) throw UsageError("probe mode needs a pixel agent (agent.proprioceptive is set)");
    if (!diag.valid) throw UsageError("probe mode: dataset has no complete episode for the diagnostic batch");
    Rng rng = Rng(stream_seed(seed_, kDiag)).split(1);
    nlohmann::json p;
    p["jacobian_frobenius"] = jacobian_frobenius(agent_.encoder, diag.batch.obs, cfg_.probe_jacobian_samples, rng);
    const Tensor z = encode_no_grad(agent_, diag.batch.obs);
    const Tensor y = td_targets(agent_, diag.batch, encode_no_grad(agent_, diag.batch.next_obs), true);
    auto loss = [&](const Tensor& feats) {
      Tensor q = mlp_forward(agent_.critic, concat_cols({encode_trunk(agent_.encoder, feats), diag.batch.action}));
      return mse_loss(q, y);
    };
    nlohmann::json curve = nlohmann::json::array();
    for (auto [alpha, l] : checkerboard_probe(z, loss, cfg_.probe_amplitudes)) curve.push_back({{"alpha", alpha}, {"td_loss", l}});
    p["checkerboard"] = curve;
    std::vector<double> g = feature_gradient(agent_, diag.batch, true, rng);
    const auto dirs = make_directions(cfg_.agent.nd, z.dim(2), z.dim(3), &rng);
    p["nd_feature_gradient"] = nd_score(g, z.shape(), dirs, cfg_.agent.nd);
    p["robust_nd_feature_gradient"] = robust_nd(g, z.shape(), dirs, cfg_.agent.nd);
    p["nd_features"] = nd_score(z.values(), z.shape(), dirs, cfg_.agent.nd);
    summary_["probe"] = p;
  }

  double exploration_std(std::uint64_t t) const {
    const double horizon = cfg_.explore_decay * static_cast<double>(cfg_.online_steps);
    const double frac = std::min(1.0, static_cast<double>(t) / std::max(horizon, 1.0));
    return cfg_.explore_start + (cfg_.explore_end - cfg_.explore_start) * frac;
  }

  void run_online() {
    DotReacher env(cfg_.env);
    const bool resuming = !opts_.resume_from.empty();
    if (resuming) {
      const CheckpointData d = read_checkpoint(opts_.resume_from);
      restore_agent(agent_, d);
      restore_state(state_, d, true);
      env.restore(state_.env_state, state_.obs);
      log("resumed at step " + std::to_string(state_.step));
    } else {
      state_.replay.emplace(std::max<std::size_t>(cfg_.online_steps, 1), cfg_.env.frame_stack, cfg_.env.size);
      state_.episodes = Rng(stream_seed(seed_, kEpisodes));
      state_.explore = Rng(stream_seed(seed_, kExplore));
      state_.obs = env.reset(state_.episodes.next());
    }
    open_metrics(resuming);
    if (!resuming) {
      MetricsRow init;
      init.step = 0;
      if (cfg_.agent.use_lix) init.S = agent_.dual.S;
      emit(init);
    }

    ReplayBuffer& replay = *state_.replay;
    Window w;
    std::optional<double> acc;
    while (state_.step < cfg_.online_steps) {
      const std::uint64_t t = ++state_.step;
      const auto p = env.proprio();
      std::vector<double> action;
      if (t <= cfg_.seed_steps)
        action = {state_.explore.uniform(-1.0, 1.0), state_.explore.uniform(-1.0, 1.0)};
      else
        action = act(agent_, state_.obs, p, exploration_std(t), &state_.explore);
      StepResult r = env.step({action[0], action[1]});
      Transition tr;
      tr.obs = state_.obs;
      tr.action = action;
      tr.reward = r.reward;
      tr.done = r.done;
      tr.next_obs = r.obs;
      tr.proprio.assign(p.begin(), p.end());
      const auto np = env.proprio();
      tr.next_proprio.assign(np.begin(), np.end());
      replay.push(std::move(tr));
      if (cfg_.agent.reward_normalize) agent_.reward_stat.push(r.reward);
      state_.episode_return += r.reward;
      if (r.done) {
        w.ret += state_.episode_return;
        ++w.n_ret;
        state_.episode_return = 0.0;
        state_.obs = env.reset(state_.episodes.next());
      } else {
        state_.obs = std::move(r.obs);
      }

      if (t >= cfg_.seed_steps && replay.size() > cfg_.agent.n_step) {
        Batch b = replay.sample_nstep(cfg_.batch_size, cfg_.agent.n_step, cfg_.agent.gamma, agent_.rng);
        CriticStats s = critic_update(agent_, b);
        w.policy += actor_update(agent_, b, s.features);
        ++w.n_policy;
        update_targets(agent_);
        w.add_critic(s, pixel_);
        if (auto v = accumulate_nd(s)) acc = v;
      }
      if (t % cfg_.metrics_every == 0 || t == cfg_.online_steps) {
        MetricsRow row = window_row(w);
        if (w.n_q > 0) row.q_mean = w.qsum / static_cast<double>(w.n_q);
        row.nd_accumulated = acc;
        emit(row);
        w = Window{};
        state_.env_state = env.state();
        if (after_tick()) return;
      }
    }
    state_.env_state = env.state();
    auto [mean, sd] = evaluate_policy(agent_, cfg_.env, cfg_.eval_episodes, stream_seed(seed_, kEval));
    summary_["return_mean"] = mean;
    summary_["return_sd"] = sd;
    summarize_rows();
    checkpoint("final.ckpt");
  }

  void summarize_rows() {
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
      if (it->td_loss) {
        summary_["final_td_loss"] = *it->td_loss;
        break;
      }
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
      if (it->policy_loss) {
        summary_["final_policy_loss"] = *it->policy_loss;
        break;
      }
    if (cfg_.agent.use_lix) summary_["S_final"] = agent_.dual.S;
  }

  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  const RunOptions& opts_;
  std::string dir_;
  bool pixel_;
  Agent agent_;
  RunState state_;
  MetricsWriter writer_;
  std::vector<MetricsRow> rows_;
  nlohmann::json summary_;
  std::string config_json_;
  bool stopped_ = false;
  std::optional<std::pair<double, double>> final_eval_;
};

}  // namespace

std::string seed_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / cfg.name / ("seed_" + std::to_string(seed))).string();
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  cfg.validate();
  return SeedRun(cfg, seed, opts).run();
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  std::vector<SeedResult> out;
  for (auto seed : cfg.seeds) {
    out.push_back(run_seed(cfg, seed, opts));
    if (opts.log) opts.log(cfg.name + " seed " + std::to_string(seed) + (out.back().ok ? " done" : " FAILED: " + out.back().error));
  }
  return out;
}

std::vector<std::string> preset_names() {
  return {"augmented", "non_augmented", "proprioceptive", "frozen_random", "frozen_pretrained", "norm_r", "nstep10", "alix"};
}

void apply_preset(ExperimentConfig& cfg, const std::string& preset) {
  auto& a = cfg.agent;
  a.use_lix = a.use_shift_aug = a.freeze_encoder = a.proprioceptive = a.reward_normalize = false;
  a.encoder.lix_placement = LixPlacement::none;
  cfg.pretrained_encoder.clear();
  if (preset == "augmented") {
    a.use_shift_aug = true;
  } else if (preset == "non_augmented") {
  } else if (preset == "proprioceptive") {
    a.proprioceptive = true;
  } else if (preset == "frozen_random") {
    a.freeze_encoder = true;
  } else if (preset == "frozen_pretrained") {
    a.freeze_encoder = true;
    cfg.pretrained_encoder = (fs::path(cfg.output_dir) / "augmented" / "seed_{seed}" / "final.ckpt").string();
  } else if (preset == "norm_r") {
    a.reward_normalize = true;
  } else if (preset == "nstep10") {
    a.n_step = 10;
  } else if (preset == "alix") {
    a.use_lix = true;
    a.adaptive_S = true;
    a.encoder.lix_placement = LixPlacement::after_each_nonlinearity;
  } else {
    throw UsageError("unknown preset '" + preset + "'");
  }
  cfg.name = preset;
}

std::vector<std::string> sweep_rows(const std::string& sweep) {
  if (sweep == "ablations")
    return {"augmented", "non_augmented", "proprioceptive", "frozen_random", "frozen_pretrained", "norm_r", "nstep10"};
  if (sweep == "regularizers") return {"non_augmented", "augmented", "alix", "proprioceptive"};
  throw UsageError("unknown sweep '" + sweep + "'");
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base, const std::string& sweep) {
  std::vector<ExperimentConfig> out;
  for (const auto& row : sweep_rows(sweep)) {
    ExperimentConfig c = base;
    c.output_dir = (fs::path(base.output_dir) / base.name).string();
    apply_preset(c, row);
    c.validate();
    out.push_back(std::move(c));
  }
  // frozen_pretrained reads the augmented row's final weights.
  std::stable_partition(out.begin(), out.end(), [](const ExperimentConfig& c) { return c.name != "frozen_pretrained"; });
  return out;
}

nlohmann::json collect_sweep(const std::vector<ExperimentConfig>& rows) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : rows) {
    nlohmann::json seeds = nlohmann::json::array();
    std::vector<double> returns;
    for (auto s : c.seeds) {
      std::ifstream in(seed_directory(c, s) + "/summary.json");
      if (!in) continue;
      auto summary = nlohmann::json::parse(in);
      if (summary.contains("return_mean")) returns.push_back(summary["return_mean"].get<double>());
      seeds.push_back(summary);
    }
    nlohmann::json row{{"seeds", seeds}};
    if (!returns.empty()) {
      double m = 0;
      for (double r : returns) m += r;
      m /= static_cast<double>(returns.size());
      double v = 0;
      for (double r : returns) v += (r - m) * (r - m);
      row["return_mean"] = m;
      row["return_sd"] = returns.size() > 1 ? std::sqrt(v / static_cast<double>(returns.size() - 1)) : 0.0;
    }
    j[c.name] = row;
  }
  return j;
}

}  // namespace alix
