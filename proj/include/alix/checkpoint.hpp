#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alix/rl.hpp"
#include "alix/tensor.hpp"

namespace alix {

/// Little-endian container: "ALIXCKPT", u32 version, u32 entry count, then
/// named entries (tensors as rank + u64 dims + f64 values, blobs as u64 length
/// + bytes), then a CRC-32 of everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

struct CheckpointData {
  std::map<std::string, StoredTensor> tensors;
  std::map<std::string, std::string> blobs;

  friend bool operator==(const CheckpointData&, const CheckpointData&) = default;
};

std::string encode_checkpoint(const CheckpointData& data);
/// Throws IntegrityError on a bad magic, truncation or checksum mismatch and
/// IncompatibleVersion on another format version.
CheckpointData decode_checkpoint(const std::string& bytes);

/// Written to a temporary file and renamed into place.
void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

/// Parameters, optimizer moments, dual state, reward statistics and RNG stream.
CheckpointData agent_state(const Agent& agent);
/// Loads `data` into an agent built from the same config. Every name and shape
/// is checked before anything is written, so a mismatch leaves `agent` intact.
void restore_agent(Agent& agent, const CheckpointData& data);

/// Agent state plus the resolved experiment config (as "config" blob) and any
/// extra blobs.
void save_checkpoint(const std::string& path, const Agent& agent, const std::string& config_json,
                     const std::map<std::string, std::string>& extra = {});
/// Rebuilds the agent from the stored config and restores its state.
Agent load_checkpoint(const std::string& path);

/// Replay contents as a blob (for online resume and stored datasets).
std::string encode_replay(const ReplayBuffer& buffer);
ReplayBuffer decode_replay(const std::string& blob);

}  // namespace alix
