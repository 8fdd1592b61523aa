#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "dmtrl/core.hpp"

namespace dmtrl {

/// Worker -> server, once per round.
struct WorkerUpdateMsg {
  std::uint32_t task_id = 0;
  std::uint32_t round = 0;
  Vector delta_b;  // already eta-scaled
  double local_obj_gain = 0.0;
  std::int64_t wall_micros = 0;
};

/// Server -> worker, once per round.
struct ServerBroadcastMsg {
  std::uint32_t task_id = 0;
  std::uint32_t round = 0;
  Vector w;
  double sigma_ii = 0.0;
  double rho = 0.0;
};

/// Field-wise exact equality (payload sizes may differ).
bool operator==(const WorkerUpdateMsg& a, const WorkerUpdateMsg& b);
bool operator==(const ServerBroadcastMsg& a, const ServerBroadcastMsg& b);

using Message = std::variant<WorkerUpdateMsg, ServerBroadcastMsg>;

inline constexpr std::uint8_t kWorkerUpdateTag = 1;
inline constexpr std::uint8_t kServerBroadcastTag = 2;

/// Little-endian frame:
///   u8 tag | u32 task_id | u32 round | u32 d | d x f64 payload | trailing f64 scalars
/// WorkerUpdate trails (local_obj_gain, wall_micros); ServerBroadcast trails
/// (sigma_ii, rho). wall_micros travels as an f64 holding an integer.
std::vector<std::uint8_t> encode_msg(const Message& msg);

/// Decodes exactly one frame. Throws BadTag, TruncatedFrame or TrailingBytes.
Message decode_msg(std::span<const std::uint8_t> frame);

/// Frame size for a payload of dimension d (both message kinds carry two scalars).
constexpr std::size_t frame_size(std::size_t d) { return 1 + 4 + 4 + 4 + 8 * d + 16; }

}  // namespace dmtrl
