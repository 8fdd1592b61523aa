#include "dmtrl/message.hpp"

#include <bit>
#include <cstring>

namespace dmtrl {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * k);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * k);
    return std::bit_cast<double>(bits);
  }
  void need(std::size_t count) const {
    if (in_.size() - pos_ < count) {
      throw Error(ErrorCode::TruncatedFrame, "frame ends at byte " + std::to_string(in_.size()));
    }
  }
  void finish() const {
    if (pos_ != in_.size()) {
      throw Error(ErrorCode::TrailingBytes, std::to_string(in_.size() - pos_) + " bytes after frame");
    }
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, std::uint8_t tag, std::uint32_t task_id, std::uint32_t round, const Vector& payload) {
  w.u8(tag);
  w.u32(task_id);
  w.u32(round);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  for (Index k = 0; k < payload.size(); ++k) w.f64(payload[k]);
}

Vector read_payload(Reader& r) {
  const std::uint32_t d = r.u32();
  r.need(8 * static_cast<std::size_t>(d));
  Vector payload(static_cast<Index>(d));
  for (Index k = 0; k < payload.size(); ++k) payload[k] = r.f64();
  return payload;
}

bool same_payload(const Vector& a, const Vector& b) { return a.size() == b.size() && (a.array() == b.array()).all(); }

}  // namespace

bool operator==(const WorkerUpdateMsg& a, const WorkerUpdateMsg& b) {
  return a.task_id == b.task_id && a.round == b.round && same_payload(a.delta_b, b.delta_b) &&
         a.local_obj_gain == b.local_obj_gain && a.wall_micros == b.wall_micros;
}

bool operator==(const ServerBroadcastMsg& a, const ServerBroadcastMsg& b) {
  return a.task_id == b.task_id && a.round == b.round && same_payload(a.w, b.w) && a.sigma_ii == b.sigma_ii &&
         a.rho == b.rho;
}

std::vector<std::uint8_t> encode_msg(const Message& msg) {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, WorkerUpdateMsg>) {
          Writer w(frame_size(static_cast<std::size_t>(m.delta_b.size())));
          write_header(w, kWorkerUpdateTag, m.task_id, m.round, m.delta_b);
          w.f64(m.local_obj_gain);
          w.f64(static_cast<double>(m.wall_micros));
          return w.take();
        } else {
          Writer w(frame_size(static_cast<std::size_t>(m.w.size())));
          write_header(w, kServerBroadcastTag, m.task_id, m.round, m.w);
          w.f64(m.sigma_ii);
          w.f64(m.rho);
          return w.take();
        }
      },
      msg);
}

Message decode_msg(std::span<const std::uint8_t> frame) {
  Reader r(frame);
  const std::uint8_t tag = r.u8();
  if (tag != kWorkerUpdateTag && tag != kServerBroadcastTag) {
    throw Error(ErrorCode::BadTag, "unknown message tag " + std::to_string(tag));
  }
  const std::uint32_t task_id = r.u32();
  const std::uint32_t round = r.u32();
  Vector payload = read_payload(r);
  const double first = r.f64();
  const double second = r.f64();
  r.finish();
  if (tag == kWorkerUpdateTag) {
    return WorkerUpdateMsg{task_id, round, std::move(payload), first, static_cast<std::int64_t>(second)};
  }
  return ServerBroadcastMsg{task_id, round, std::move(payload), first, second};
}

}  // namespace dmtrl
