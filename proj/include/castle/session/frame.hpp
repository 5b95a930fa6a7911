#pragma once

#include <zlib.h>

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "castle/codec/bits.hpp"
#include "castle/errors.hpp"
#include "castle/wire_le.hpp"

namespace castle::session {

enum class FrameType : std::uint8_t { Data = 1, Request = 2, Response = 3, Close = 4 };

inline bool valid_frame_type(std::uint8_t v) noexcept { return v >= 1 && v <= 4; }

// Frame layout (little-endian):
//   type u8 | stream_id u16 | length u32 | payload | crc32 u32
// The type byte always has its top bit set and carries a FIN flag in bit 6,
// so a zero bit where a frame should start marks padding to the end of the
// current command.
inline constexpr std::uint8_t kFrameLead = 0x80;
inline constexpr std::uint8_t kFrameFin = 0x40;
inline constexpr std::size_t kFrameHeaderBytes = 7;
inline constexpr std::size_t kFrameOverheadBytes = kFrameHeaderBytes + 4;
inline constexpr std::size_t kMaxChunkBytes = 4096;

struct Frame {
  std::uint16_t stream_id = 0;
  FrameType type = FrameType::Data;
  bool fin = true;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Frame&, const Frame&) = default;
};

inline std::uint32_t frame_crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > 0xFFFFFFFFull) throw ArgumentError("frame payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameOverheadBytes + f.payload.size());
  out.push_back(static_cast<std::uint8_t>(kFrameLead | (f.fin ? kFrameFin : 0) | static_cast<std::uint8_t>(f.type)));
  le::put_u16(out, f.stream_id);
  le::put_u32(out, static_cast<std::uint32_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  le::put_u32(out, frame_crc(out));
  return out;
}

/// Parses one complete frame occupying all of `bytes`.
inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameOverheadBytes) throw DecodeError("frame shorter than its header");
  const std::uint8_t t = bytes[0];
  if (!(t & kFrameLead) || (t & 0x30) || !valid_frame_type(t & 0x0F)) throw DecodeError("bad frame type byte");
  const std::uint32_t len = le::get_u32(bytes.data() + 3);
  if (bytes.size() != kFrameOverheadBytes + len) throw DecodeError("frame length mismatch");
  const std::size_t body = kFrameHeaderBytes + len;
  if (frame_crc(bytes.first(body)) != le::get_u32(bytes.data() + body)) throw FrameCorrupt("frame checksum mismatch");
  Frame f;
  f.type = static_cast<FrameType>(t & 0x0F);
  f.fin = t & kFrameFin;
  f.stream_id = le::get_u16(bytes.data() + 1);
  f.payload.assign(bytes.begin() + kFrameHeaderBytes, bytes.begin() + static_cast<std::ptrdiff_t>(body));
  return f;
}

struct Message {
  std::uint16_t stream_id = 0;
  FrameType type = FrameType::Data;
  std::vector<std::uint8_t> bytes;
  friend bool operator==(const Message&, const Message&) = default;
};

/// Outgoing side: splits queued messages into chunk frames, round-robin
/// across streams.
class FrameWriter {
 public:
  explicit FrameWriter(std::size_t chunk = kMaxChunkBytes) : chunk_(chunk) {
    if (chunk == 0 || chunk > kMaxChunkBytes) throw ArgumentError("chunk size out of range");
  }

  void enqueue(std::uint16_t stream_id, FrameType type, std::span<const std::uint8_t> bytes) {
    auto& q = streams_[stream_id];
    q.push_back(Pending{type, {bytes.begin(), bytes.end()}, 0});
    queued_bytes_ += bytes.size();
  }

  bool empty() const noexcept { return streams_.empty(); }
  std::size_t queued_bytes() const noexcept { return queued_bytes_; }

  /// Next frame on the wire, or nullopt when nothing is queued.
  std::optional<std::vector<std::uint8_t>> next_frame() {
    if (streams_.empty()) return std::nullopt;
    auto it = streams_.upper_bound(last_stream_);
    if (it == streams_.end() || !started_) it = streams_.begin();
    started_ = true;
    last_stream_ = it->first;

    auto& q = it->second;
    Pending& m = q.front();
    const std::size_t n = std::min(chunk_, m.bytes.size() - m.sent);
    Frame f;
    f.stream_id = it->first;
    f.type = m.type;
    f.payload.assign(m.bytes.begin() + static_cast<std::ptrdiff_t>(m.sent),
                     m.bytes.begin() + static_cast<std::ptrdiff_t>(m.sent + n));
    m.sent += n;
    queued_bytes_ -= n;
    f.fin = m.sent == m.bytes.size();
    if (f.fin) {
      q.pop_front();
      if (q.empty()) streams_.erase(it);
    }
    return encode_frame(f);
  }

 private:
  struct Pending {
    FrameType type;
    std::vector<std::uint8_t> bytes;
    std::size_t sent;
  };

  std::size_t chunk_;
  std::map<std::uint16_t, std::deque<Pending>> streams_;
  std::size_t queued_bytes_ = 0;
  std::uint16_t last_stream_ = 0;
  bool started_ = false;
};

struct AssemblerStats {
  std::uint64_t frames = 0;
  std::uint64_t corrupt_frames = 0;   // checksum mismatches
  std::uint64_t resyncs = 0;          // garbage headers or non-zero padding
  std::uint64_t padding_bits = 0;
};

/// Incoming side: consumes the bits decoded from each received command and
/// rebuilds frames and then whole messages per stream.
///
/// Bits are pushed one command at a time. Between frames, a 0 bit means the
/// sender ran dry and padded the rest of that command; those bits are checked
/// to be zero and discarded. Anything unparseable drops the buffer.
class FrameAssembler {
 public:
  void push(const Bits& command_bits) {
    for (std::size_t i = 0; i < command_bits.size(); ++i) bits_.push_back(command_bits[i]);
    process();
  }

  /// Marks the boundary of an undecodable command; any partial frame is lost.
  void reset() {
    if (pos_ < bits_.size()) ++stats_.resyncs;
    drop();
  }

  bool has_message() const noexcept { return !ready_.empty(); }

  std::optional<Message> pop() {
    if (ready_.empty()) return std::nullopt;
    Message m = std::move(ready_.front());
    ready_.pop_front();
    return m;
  }

  /// Payload bytes of a stream's message received so far (incomplete part only).
  std::size_t partial_bytes(std::uint16_t stream_id) const {
    auto it = partial_.find(stream_id);
    return it == partial_.end() ? 0 : it->second.bytes.size();
  }

  std::uint64_t delivered_bytes() const noexcept { return delivered_bytes_; }
  const AssemblerStats& stats() const noexcept { return stats_; }

 private:
  void drop() {
    bits_.clear();
    pos_ = 0;
  }

  std::uint64_t read_bits(std::size_t at, unsigned width) const {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v = (v << 1) | bits_[at + i];
    return v;
  }

  std::uint8_t byte_at(std::size_t at) const { return static_cast<std::uint8_t>(read_bits(at, 8)); }

  void process() {
    for (;;) {
      const std::size_t avail = bits_.size() - pos_;
      if (avail == 0) return drop();
      if (!bits_[pos_]) {
        for (std::size_t i = pos_; i < bits_.size(); ++i)
          if (bits_[i]) {
            ++stats_.resyncs;
            return drop();
          }
        stats_.padding_bits += avail;
        return drop();
      }
      if (avail < kFrameHeaderBytes * 8) return;
      std::vector<std::uint8_t> head(kFrameHeaderBytes);
      for (std::size_t i = 0; i < head.size(); ++i) head[i] = byte_at(pos_ + 8 * i);
      const std::uint8_t t = head[0];
      const std::uint32_t len = le::get_u32(head.data() + 3);
      if ((t & 0x30) || !valid_frame_type(t & 0x0F) || len > kMaxChunkBytes) {
        ++stats_.resyncs;
        return drop();
      }
      const std::size_t total = (kFrameOverheadBytes + len) * 8;
      if (avail < total) return;
      std::vector<std::uint8_t> raw(kFrameOverheadBytes + len);
      for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = byte_at(pos_ + 8 * i);
      pos_ += total;
      Frame f;
      try {
        f = decode_frame(raw);
      } catch (const FrameCorrupt&) {
        ++stats_.corrupt_frames;
        return drop();
      }
      ++stats_.frames;
      deliver(std::move(f));
      if (pos_ > (1u << 16)) {
        bits_.erase(bits_.begin(), bits_.begin() + static_cast<std::ptrdiff_t>(pos_));
        pos_ = 0;
      }
    }
  }

  void deliver(Frame f) {
    auto [it, fresh] = partial_.try_emplace(f.stream_id);
    Message& m = it->second;
    if (fresh) {
      m.stream_id = f.stream_id;
      m.type = f.type;
    }
    m.bytes.insert(m.bytes.end(), f.payload.begin(), f.payload.end());
    delivered_bytes_ += f.payload.size();
    if (f.fin) {
      ready_.push_back(std::move(m));
      partial_.erase(it);
    }
  }

  std::vector<std::uint8_t> bits_;  // one entry per bit
  std::size_t pos_ = 0;
  std::map<std::uint16_t, Message> partial_;
  std::deque<Message> ready_;
  std::uint64_t delivered_bytes_ = 0;
  AssemblerStats stats_;
};

}  // namespace castle::session
