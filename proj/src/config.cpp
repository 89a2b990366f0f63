#include "alix/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "alix/errors.hpp"

namespace alix {

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::online: return "online";
    case RunMode::offline_eval: return "offline-eval";
    case RunMode::probe: return "probe";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "online") return RunMode::online;
  if (s == "offline-eval" || s == "offline") return RunMode::offline_eval;
  if (s == "probe") return RunMode::probe;
  throw std::invalid_argument("unknown run mode '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& v) {
  const std::string s = trim(v);
  T out{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || ptr != end || s.empty()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number<T>(item));
  }
  return out;
}

ShiftGranularity granularity_from_string(const std::string& s) {
  if (s == "per-location") return ShiftGranularity::per_location;
  if (s == "per-image") return ShiftGranularity::per_image;
  throw std::invalid_argument("unknown shift granularity '" + s + "'");
}

std::string to_string(ShiftGranularity g) { return g == ShiftGranularity::per_location ? "per-location" : "per-image"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "clamp") return Boundary::clamp;
  if (s == "interior") return Boundary::interior;
  throw std::invalid_argument("unknown boundary mode '" + s + "'");
}

std::string to_string(Boundary b) { return b == Boundary::clamp ? "clamp" : "interior"; }

RobustReduction reduction_from_string(const std::string& s) {
  if (s == "mean") return RobustReduction::mean;
  if (s == "sum") return RobustReduction::sum;
  throw std::invalid_argument("unknown reduction '" + s + "'");
}

std::string to_string(RobustReduction r) { return r == RobustReduction::mean ? "mean" : "sum"; }

struct Setting {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<nlohmann::json(const ExperimentConfig&)> get;
};

template <class T>
Setting number(std::string key, T ExperimentConfig::*field) {
  return {key, [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<T>(v); },
          [field](const ExperimentConfig& c) { return nlohmann::json(c.*field); }};
}

template <class F>
Setting num_at(std::string key, F access) {
  using T = std::remove_reference_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  return {key, [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_number<T>(v); },
          [access](const ExperimentConfig& c) { return nlohmann::json(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class F>
Setting flag_at(std::string key, F access) {
  return {key, [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(v); },
          [access](const ExperimentConfig& c) { return nlohmann::json(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class T, class F>
Setting list_at(std::string key, F access) {
  return {key, [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_list<T>(v); },
          [access](const ExperimentConfig& c) { return nlohmann::json(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class F, class Parse, class Print>
Setting enum_at(std::string key, F access, Parse parse, Print print) {
  return {key, [access, parse](ExperimentConfig& c, const std::string& v) { access(c) = parse(trim(v)); },
          [access, print](const ExperimentConfig& c) {
            return nlohmann::json(print(access(const_cast<ExperimentConfig&>(c))));
          }};
}

Setting text_at(std::string key, std::string ExperimentConfig::*field) {
  return {key, [field](ExperimentConfig& c, const std::string& v) { c.*field = trim(v); },
          [field](const ExperimentConfig& c) { return nlohmann::json(c.*field); }};
}

const std::vector<Setting>& settings() {
  using C = ExperimentConfig;
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    t.push_back(enum_at("run.mode", [](C& c) -> RunMode& { return c.mode; }, run_mode_from_string,
                        [](RunMode m) { return to_string(m); }));
    t.push_back(text_at("run.name", &C::name));
    t.push_back(list_at<std::uint64_t>("run.seeds", [](C& c) -> auto& { return c.seeds; }));
    t.push_back(text_at("run.output_dir", &C::output_dir));
    t.push_back(number("run.metrics_every", &C::metrics_every));
    t.push_back(number("run.checkpoint_every", &C::checkpoint_every));

    t.push_back(number("data.dataset_size", &C::dataset_size));
    t.push_back(number("data.batch_size", &C::batch_size));
    t.push_back(number("data.eval_steps", &C::eval_steps));
    t.push_back(number("data.improve_steps", &C::improve_steps));
    t.push_back(number("data.online_steps", &C::online_steps));
    t.push_back(number("data.seed_steps", &C::seed_steps));
    t.push_back(number("data.explore_start", &C::explore_start));
    t.push_back(number("data.explore_end", &C::explore_end));
    t.push_back(number("data.explore_decay", &C::explore_decay));
    t.push_back(number("data.diag_batch", &C::diag_batch));
    t.push_back(number("data.eval_episodes", &C::eval_episodes));

    t.push_back(flag_at("agent.use_lix", [](C& c) -> bool& { return c.agent.use_lix; }));
    t.push_back(flag_at("agent.use_shift_aug", [](C& c) -> bool& { return c.agent.use_shift_aug; }));
    t.push_back(flag_at("agent.adaptive_S", [](C& c) -> bool& { return c.agent.adaptive_S; }));
    t.push_back(flag_at("agent.freeze_encoder", [](C& c) -> bool& { return c.agent.freeze_encoder; }));
    t.push_back(flag_at("agent.proprioceptive", [](C& c) -> bool& { return c.agent.proprioceptive; }));
    t.push_back(flag_at("agent.reward_normalize", [](C& c) -> bool& { return c.agent.reward_normalize; }));
    t.push_back(text_at("agent.pretrained_encoder", &C::pretrained_encoder));
    t.push_back(num_at("agent.n_step", [](C& c) -> auto& { return c.agent.n_step; }));
    t.push_back(num_at("agent.gamma", [](C& c) -> auto& { return c.agent.gamma; }));
    t.push_back(num_at("agent.polyak", [](C& c) -> auto& { return c.agent.polyak; }));
    t.push_back(num_at("agent.lr", [](C& c) -> auto& { return c.agent.optim.lr; }));
    t.push_back(num_at("agent.beta1", [](C& c) -> auto& { return c.agent.optim.beta1; }));
    t.push_back(num_at("agent.beta2", [](C& c) -> auto& { return c.agent.optim.beta2; }));
    t.push_back(list_at<std::size_t>("agent.hidden", [](C& c) -> auto& { return c.agent.hidden; }));
    t.push_back(num_at("agent.shift_pad", [](C& c) -> auto& { return c.agent.shift_pad; }));
    t.push_back(enum_at("agent.granularity", [](C& c) -> ShiftGranularity& { return c.agent.granularity; },
                        granularity_from_string, [](ShiftGranularity g) { return to_string(g); }));

    t.push_back(list_at<std::size_t>("encoder.feature_maps", [](C& c) -> auto& { return c.agent.encoder.feature_maps; }));
    t.push_back(list_at<std::size_t>("encoder.strides", [](C& c) -> auto& { return c.agent.encoder.strides; }));
    t.push_back(Setting{"encoder.filter_size",
                        [](C& c, const std::string& v) {
                          auto k = parse_list<std::size_t>(v);
                          c.agent.encoder.filter_sizes.clear();
                          for (auto s : k) c.agent.encoder.filter_sizes.emplace_back(s, s);
                        },
                        [](const C& c) {
                          std::vector<std::size_t> k;
                          for (auto [h, w] : c.agent.encoder.filter_sizes) k.push_back(h);
                          return nlohmann::json(k);
                        }});
    t.push_back(num_at("encoder.padding", [](C& c) -> auto& { return c.agent.encoder.padding; }));
    t.push_back(num_at("encoder.trunk_dim", [](C& c) -> auto& { return c.agent.encoder.trunk_dim; }));
    t.push_back(enum_at("encoder.lix_placement", [](C& c) -> LixPlacement& { return c.agent.encoder.lix_placement; },
                        lix_placement_from_string, [](LixPlacement p) { return to_string(p); }));

    t.push_back(num_at("dual.S_init", [](C& c) -> auto& { return c.agent.dual.S; }));
    t.push_back(num_at("dual.target_nd", [](C& c) -> auto& { return c.agent.dual.target_nd; }));
    t.push_back(num_at("dual.lr", [](C& c) -> auto& { return c.agent.dual.lr; }));
    t.push_back(num_at("dual.beta1", [](C& c) -> auto& { return c.agent.dual.beta1; }));
    t.push_back(num_at("dual.beta2", [](C& c) -> auto& { return c.agent.dual.beta2; }));
    t.push_back(num_at("dual.S_min", [](C& c) -> auto& { return c.agent.dual.S_min; }));
    t.push_back(num_at("dual.S_max", [](C& c) -> auto& { return c.agent.dual.S_max; }));

    t.push_back(num_at("nd.directions", [](C& c) -> auto& { return c.agent.nd.directions; }));
    t.push_back(flag_at("nd.monte_carlo", [](C& c) -> bool& { return c.agent.nd.monte_carlo; }));
    t.push_back(num_at("nd.epsilon", [](C& c) -> auto& { return c.agent.nd.epsilon; }));
    t.push_back(enum_at("nd.boundary", [](C& c) -> Boundary& { return c.agent.nd.boundary; }, boundary_from_string,
                        [](Boundary b) { return to_string(b); }));
    t.push_back(enum_at("nd.reduction", [](C& c) -> RobustReduction& { return c.agent.nd.reduction; },
                        reduction_from_string, [](RobustReduction r) { return to_string(r); }));
    t.push_back(number("nd.ema_decay", &C::nd_ema_decay));

    t.push_back(enum_at("env.mode", [](C& c) -> RewardMode& { return c.env.mode; }, reward_mode_from_string,
                        [](RewardMode m) { return to_string(m); }));
    t.push_back(num_at("env.episode_length", [](C& c) -> auto& { return c.env.episode_length; }));
    t.push_back(num_at("env.goal_radius", [](C& c) -> auto& { return c.env.goal_radius; }));
    t.push_back(num_at("env.sparse_reward", [](C& c) -> auto& { return c.env.sparse_reward; }));
    t.push_back(num_at("env.dense_scale", [](C& c) -> auto& { return c.env.dense_scale; }));
    t.push_back(num_at("env.damping", [](C& c) -> auto& { return c.env.damping; }));
    t.push_back(num_at("env.accel", [](C& c) -> auto& { return c.env.accel; }));

    t.push_back(list_at<double>("probe.amplitudes", [](C& c) -> auto& { return c.probe_amplitudes; }));
    t.push_back(number("probe.jacobian_samples", &C::probe_jacobian_samples));
    return t;
  }();
  return table;
}

const Setting* find_setting(const std::string& key) {
  for (const auto& s : settings())
    if (s.key == key) return &s;
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw UsageError(field + ": " + why); };
  if (name.empty() || name.find('/') != std::string::npos) fail("run.name", "must be a non-empty plain name");
  if (seeds.empty()) fail("run.seeds", "at least one seed is required");
  if (metrics_every == 0) fail("run.metrics_every", "must be positive");
  if (checkpoint_every % metrics_every != 0) fail("run.checkpoint_every", "must be a multiple of run.metrics_every");
  if (batch_size == 0) fail("data.batch_size", "must be positive");
  if (diag_batch == 0) fail("data.diag_batch", "must be positive");
  if (eval_episodes == 0) fail("data.eval_episodes", "must be positive");
  if (mode != RunMode::online && dataset_size < agent.n_step + 1) fail("data.dataset_size", "too small for agent.n_step");
  if (mode == RunMode::online && online_steps == 0) fail("data.online_steps", "must be positive");
  if (mode == RunMode::online && seed_steps == 0) fail("data.seed_steps", "must be positive");
  if (!(explore_start >= 0.0 && explore_end >= 0.0)) fail("data.explore_start", "noise scales must be >= 0");
  if (!(explore_decay > 0.0 && explore_decay <= 1.0)) fail("data.explore_decay", "must lie in (0, 1]");
  if (!(nd_ema_decay >= 0.0 && nd_ema_decay < 1.0)) fail("nd.ema_decay", "must lie in [0, 1)");
  if (agent.proprioceptive && agent.use_lix) fail("agent.use_lix", "excluded by agent.proprioceptive");
  if (agent.proprioceptive && agent.use_shift_aug) fail("agent.use_shift_aug", "excluded by agent.proprioceptive");
  if (agent.proprioceptive && !pretrained_encoder.empty())
    fail("agent.pretrained_encoder", "excluded by agent.proprioceptive");
  if (agent.use_lix && agent.encoder.lix_placement == LixPlacement::none)
    fail("encoder.lix_placement", "agent.use_lix needs a placement other than none");
  if (!agent.use_lix && agent.encoder.lix_placement != LixPlacement::none)
    fail("encoder.lix_placement", "set without agent.use_lix");
  if (agent.hidden.empty()) fail("agent.hidden", "need at least one hidden layer");
  if (agent.encoder.channels_in != env.frame_stack || agent.encoder.input_height != env.size ||
      agent.encoder.input_width != env.size)
    fail("encoder", "input shape does not match the environment frames");
  auto check = [&](const std::string& section, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      fail(section, e.what());
    }
  };
  check("agent", [&] { agent.validate(); });
  check("env", [&] { env.validate(); });
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Setting* s = find_setting(key);
  if (!s) throw UsageError("unknown config key '" + key + "'");
  try {
    s->set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw UsageError(key + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("override '" + assignment + "' is not of the form section.key=value");
  apply_setting(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

namespace {

ExperimentConfig from_ptree(const boost::property_tree::ptree& tree, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw UsageError("config value '" + section + "' is outside a section");
    for (const auto& [key, value] : body) apply_setting(cfg, section + "." + key, value.data());
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("cannot read config: ") + e.what());
  }
  return from_ptree(tree, overrides);
}

ExperimentConfig config_from_string(const std::string& ini, const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream is(ini);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("cannot parse config: ") + e.what());
  }
  return from_ptree(tree, overrides);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : settings()) {
    const auto dot = s.key.find('.');
    j[s.key.substr(0, dot)][s.key.substr(dot + 1)] = s.get(cfg);
  }
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  for (const auto& [section, body] : j.items())
    for (const auto& [key, value] : body.items()) {
      std::string text;
      if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + value[i].dump();
      } else {
        text = value.dump();
      }
      apply_setting(cfg, section + "." + key, text);
    }
  cfg.validate();
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& s : settings()) out.push_back(s.key);
  return out;
}

}  // namespace alix
