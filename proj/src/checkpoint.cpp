#include "alix/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/crc.hpp>
#include <json.hpp>

#include "alix/config.hpp"
#include "alix/errors.hpp"

namespace alix {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'L', 'I', 'X', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void bytes(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void doubles(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    if (n > (end_ - pos_) / sizeof(double)) throw IntegrityError("checkpoint: truncated data");
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw IntegrityError("checkpoint: truncated data");
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(const char* p, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(p, n);
  return crc.checksum();
}

StoredTensor store(const Tensor& t) { return {t.shape(), {t.values().begin(), t.values().end()}}; }

void add_adam(CheckpointData& d, const std::string& prefix, const Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moment().size(); ++i) {
    const auto n = opt.first_moment()[i].size();
    d.tensors[prefix + ".m." + std::to_string(i)] = {{n}, opt.first_moment()[i]};
    d.tensors[prefix + ".v." + std::to_string(i)] = {{n}, opt.second_moment()[i]};
  }
  d.tensors[prefix + ".steps"] = {{1}, {static_cast<double>(opt.steps())}};
}

const StoredTensor& lookup(const CheckpointData& d, const std::string& name, const Shape& shape) {
  auto it = d.tensors.find(name);
  if (it == d.tensors.end()) throw IntegrityError("checkpoint: missing tensor " + name);
  if (it->second.shape != shape || it->second.values.size() != shape_numel(shape))
    throw IntegrityError("checkpoint: tensor " + name + " has shape " + shape_str(it->second.shape) + ", expected " +
                         shape_str(shape));
  return it->second;
}

}  // namespace

std::string encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(data.tensors.size() + data.blobs.size()));
  for (const auto& [name, t] : data.tensors) {
    w.bytes(name);
    w.pod<std::uint8_t>(0);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.pod<std::uint64_t>(d);
    w.doubles(t.values);
  }
  for (const auto& [name, b] : data.blobs) {
    w.bytes(name);
    w.pod<std::uint8_t>(1);
    w.bytes(b);
  }
  const std::uint32_t crc = crc32(w.str().data(), w.str().size());
  w.pod<std::uint32_t>(crc);
  return std::move(w.str());
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IntegrityError("checkpoint: not a checkpoint file");
  const std::size_t body = bytes.size() - 4;
  Reader r(bytes, bytes.size());
  r.seek(sizeof kMagic);
  const auto version = r.pod<std::uint32_t>();
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  if (crc32(bytes.data(), body) != stored_crc) throw IntegrityError("checkpoint: checksum mismatch");
  if (version != kCheckpointVersion)
    throw IncompatibleVersion("checkpoint format version " + std::to_string(version) + " (this build reads " +
                              std::to_string(kCheckpointVersion) + ")");
  Reader in(bytes, body);
  in.seek(sizeof kMagic + 4);
  const auto count = in.pod<std::uint32_t>();
  CheckpointData d;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = in.bytes();
    const auto kind = in.pod<std::uint8_t>();
    if (kind == 0) {
      StoredTensor t;
      const auto rank = in.pod<std::uint32_t>();
      for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(in.pod<std::uint64_t>());
      t.values = in.doubles();
      if (t.values.size() != shape_numel(t.shape)) throw IntegrityError("checkpoint: tensor " + name + " size mismatch");
      d.tensors.emplace(std::move(name), std::move(t));
    } else if (kind == 1) {
      d.blobs.emplace(std::move(name), in.bytes());
    } else {
      throw IntegrityError("checkpoint: unknown entry kind");
    }
  }
  if (in.pos() != body) throw IntegrityError("checkpoint: trailing bytes");
  return d;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  const std::string bytes = encode_checkpoint(data);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write checkpoint " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError("cannot write checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

CheckpointData agent_state(const Agent& agent) {
  CheckpointData d;
  for (const auto& [name, t] : agent.named_tensors()) d.tensors["param." + name] = store(t);
  add_adam(d, "adam.critic", agent.critic_opt);
  add_adam(d, "adam.actor", agent.actor_opt);
  const auto& s = agent.dual;
  d.tensors["dual"] = {{4}, {s.S, s.m, s.v, static_cast<double>(s.step)}};
  const auto& r = agent.reward_stat;
  d.tensors["reward_stat"] = {{3}, {static_cast<double>(r.n), r.mean, r.m2}};
  d.blobs["rng"] = agent.rng.serialize();
  return d;
}

void restore_agent(Agent& agent, const CheckpointData& d) {
  // Validate everything first.
  for (const auto& [name, t] : agent.named_tensors()) lookup(d, "param." + name, t.shape());
  auto check_adam = [&](const std::string& prefix, Adam& opt) {
    for (std::size_t i = 0; i < opt.first_moment().size(); ++i) {
      const Shape s{opt.first_moment()[i].size()};
      lookup(d, prefix + ".m." + std::to_string(i), s);
      lookup(d, prefix + ".v." + std::to_string(i), s);
    }
    lookup(d, prefix + ".steps", {1});
  };
  check_adam("adam.critic", agent.critic_opt);
  check_adam("adam.actor", agent.actor_opt);
  const auto& dual = lookup(d, "dual", {4}).values;
  const auto& rs = lookup(d, "reward_stat", {3}).values;
  auto rng_it = d.blobs.find("rng");
  if (rng_it == d.blobs.end()) throw IntegrityError("checkpoint: missing rng state");
  Rng rng = Rng::deserialize(rng_it->second);

  for (auto& [name, t] : agent.named_tensors()) {
    const auto& v = d.tensors.at("param." + name).values;
    std::copy(v.begin(), v.end(), t.values_mut().begin());
  }
  auto load_adam = [&](const std::string& prefix, Adam& opt) {
    for (std::size_t i = 0; i < opt.first_moment().size(); ++i) {
      opt.first_moment()[i] = d.tensors.at(prefix + ".m." + std::to_string(i)).values;
      opt.second_moment()[i] = d.tensors.at(prefix + ".v." + std::to_string(i)).values;
    }
    opt.set_steps(static_cast<std::int64_t>(d.tensors.at(prefix + ".steps").values[0]));
  };
  load_adam("adam.critic", agent.critic_opt);
  load_adam("adam.actor", agent.actor_opt);
  agent.dual.S = dual[0];
  agent.dual.m = dual[1];
  agent.dual.v = dual[2];
  agent.dual.step = static_cast<std::int64_t>(dual[3]);
  agent.reward_stat.n = static_cast<std::uint64_t>(rs[0]);
  agent.reward_stat.mean = rs[1];
  agent.reward_stat.m2 = rs[2];
  agent.rng = rng;
}

void save_checkpoint(const std::string& path, const Agent& agent, const std::string& config_json,
                     const std::map<std::string, std::string>& extra) {
  CheckpointData d = agent_state(agent);
  d.blobs["config"] = config_json;
  for (const auto& [k, v] : extra) d.blobs[k] = v;
  write_checkpoint(path, d);
}

Agent load_checkpoint(const std::string& path) {
  CheckpointData d = read_checkpoint(path);
  auto it = d.blobs.find("config");
  if (it == d.blobs.end()) throw IntegrityError("checkpoint: missing config");
  ExperimentConfig cfg = config_from_json(nlohmann::json::parse(it->second));
  Agent agent = make_agent(cfg.agent, 0);
  restore_agent(agent, d);
  return agent;
}

std::string encode_replay(const ReplayBuffer& buffer) {
  Writer w;
  w.pod<std::uint64_t>(buffer.capacity());
  w.pod<std::uint64_t>(buffer.frame_stack());
  w.pod<std::uint64_t>(buffer.frame_size());
  w.pod<std::uint64_t>(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& t = buffer.at(i);
    w.bytes(std::string(t.obs.pixels.begin(), t.obs.pixels.end()));
    w.bytes(std::string(t.next_obs.pixels.begin(), t.next_obs.pixels.end()));
    w.doubles(t.action);
    w.pod<double>(t.reward);
    w.pod<std::uint8_t>(t.done ? 1 : 0);
    w.doubles(t.proprio);
    w.doubles(t.next_proprio);
  }
  return std::move(w.str());
}

ReplayBuffer decode_replay(const std::string& blob) {
  Reader r(blob, blob.size());
  const auto capacity = r.pod<std::uint64_t>();
  const auto stack = r.pod<std::uint64_t>();
  const auto size = r.pod<std::uint64_t>();
  const auto count = r.pod<std::uint64_t>();
  if (capacity == 0 || count > capacity) throw IntegrityError("replay blob: bad header");
  ReplayBuffer buf(capacity, stack, size);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    auto a = r.bytes();
    auto b = r.bytes();
    t.obs.pixels.assign(a.begin(), a.end());
    t.next_obs.pixels.assign(b.begin(), b.end());
    t.action = r.doubles();
    t.reward = r.pod<double>();
    t.done = r.pod<std::uint8_t>() != 0;
    t.proprio = r.doubles();
    t.next_proprio = r.doubles();
    buf.push(std::move(t));
  }
  if (r.pos() != blob.size()) throw IntegrityError("replay blob: trailing bytes");
  return buf;
}

}  // namespace alix
