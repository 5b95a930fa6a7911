#pragma once

// Replay log (.creplay): an append-only sequence of little-endian records.
//
//   offset  size  field
//   0       2     marker 0x5243 ("CR")
//   2       2     reserved, zero
//   4       4     tick
//   8       1     player id
//   9       1     opcode (0x01 MOVE, 0x02 SET_RALLY_POINT)
//   10      2     count of selected ids (>= 1)
//   12      4*c   selected ids
//   12+4c   2     x (absolute map cell)
//   14+4c   2     y
//
// Record length is 16 + 4*count bytes. There is no file header, so an empty
// log is an empty file.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bitset>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "castle/codec/command.hpp"
#include "castle/errors.hpp"
#include "castle/wire_le.hpp"

namespace castle {

inline constexpr std::uint16_t kReplayMarker = 0x5243;
inline constexpr std::size_t kReplayFixedBytes = 16;

struct ReplayRecord {
  std::uint32_t tick = 0;
  std::uint8_t player = 0;
  Opcode opcode = Opcode::Move;
  std::vector<std::uint32_t> ids;
  std::uint16_t x = 0;
  std::uint16_t y = 0;

  friend bool operator==(const ReplayRecord&, const ReplayRecord&) = default;

  std::size_t encoded_size() const noexcept { return kReplayFixedBytes + 4 * ids.size(); }
};

inline std::vector<std::uint8_t> serialize_record(const ReplayRecord& rec) {
  if (rec.ids.empty()) throw InvalidCommand("replay record must select at least one object");
  if (rec.ids.size() > 0xFFFF) throw InvalidCommand("replay record selects too many objects");
  std::vector<std::uint8_t> out;
  out.reserve(rec.encoded_size());
  le::put_u16(out, kReplayMarker);
  le::put_u16(out, 0);
  le::put_u32(out, rec.tick);
  out.push_back(rec.player);
  out.push_back(static_cast<std::uint8_t>(rec.opcode));
  le::put_u16(out, static_cast<std::uint16_t>(rec.ids.size()));
  for (auto id : rec.ids) le::put_u32(out, id);
  le::put_u16(out, rec.x);
  le::put_u16(out, rec.y);
  return out;
}

/// Parses one record from the front of `bytes`.
///
/// Returns nullopt when the bytes hold only a prefix of a record; throws
/// FormatError (tagged with `offset`) when a fixed field is corrupt.
inline std::optional<ReplayRecord> parse_record(std::span<const std::uint8_t> bytes, std::uint64_t offset,
                                                std::size_t* consumed = nullptr) {
  if (bytes.size() >= 2 && le::get_u16(bytes.data()) != kReplayMarker) throw FormatError(offset, "bad record marker");
  if (bytes.size() >= 4 && le::get_u16(bytes.data() + 2) != 0) throw FormatError(offset, "reserved field not zero");
  if (bytes.size() >= 10 && !valid_opcode(bytes[9])) throw FormatError(offset, "unknown opcode");
  if (bytes.size() < 12) return std::nullopt;
  const std::uint16_t count = le::get_u16(bytes.data() + 10);
  if (count == 0) throw FormatError(offset, "record with empty selection");
  const std::size_t total = kReplayFixedBytes + 4u * count;
  if (bytes.size() < total) return std::nullopt;
  ReplayRecord rec;
  rec.tick = le::get_u32(bytes.data() + 4);
  rec.player = bytes[8];
  rec.opcode = static_cast<Opcode>(bytes[9]);
  rec.ids.resize(count);
  for (std::size_t i = 0; i < count; ++i) rec.ids[i] = le::get_u32(bytes.data() + 12 + 4 * i);
  rec.x = le::get_u16(bytes.data() + 12 + 4u * count);
  rec.y = le::get_u16(bytes.data() + 14 + 4u * count);
  if (consumed) *consumed = total;
  return rec;
}

namespace detail {

class FileDescriptor {
 public:
  FileDescriptor() = default;
  explicit FileDescriptor(int fd) : fd_(fd) {}
  FileDescriptor(FileDescriptor&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  FileDescriptor& operator=(FileDescriptor&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  ~FileDescriptor() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

}  // namespace detail

/// Appending writer; each record reaches the file with a single write so a
/// concurrent tailer never waits on user-space buffering.
class ReplayWriter {
 public:
  explicit ReplayWriter(const std::filesystem::path& path, bool truncate = true) : path_(path) {
    int flags = O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC;
    if (truncate) flags |= O_TRUNC;
    fd_ = detail::FileDescriptor(::open(path.c_str(), flags, 0644));
    if (!fd_) throw IoError(detail::errno_text("open " + path.string()));
    struct stat st {};
    if (::fstat(fd_.get(), &st) != 0) throw IoError(detail::errno_text("stat " + path.string()));
    size_ = static_cast<std::uint64_t>(st.st_size);
  }

  const std::filesystem::path& path() const noexcept { return path_; }
  std::uint64_t size() const noexcept { return size_; }

  /// Appends a record and returns the byte offset it starts at.
  std::uint64_t append(const ReplayRecord& rec) {
    const auto bytes = serialize_record(rec);
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = ::write(fd_.get(), bytes.data() + done, bytes.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(detail::errno_text("write " + path_.string()));
      }
      done += static_cast<std::size_t>(n);
    }
    const std::uint64_t at = size_;
    size_ += bytes.size();
    return at;
  }

 private:
  std::filesystem::path path_;
  detail::FileDescriptor fd_;
  std::uint64_t size_ = 0;
};

/// Which player ids a tailer lets through.
class PlayerFilter {
 public:
  static PlayerFilter all() {
    PlayerFilter f;
    f.allowed_.set();
    return f;
  }
  static PlayerFilter excluding(std::uint8_t player) {
    auto f = all();
    f.allowed_.reset(player);
    return f;
  }
  static PlayerFilter only(std::uint8_t player) {
    PlayerFilter f;
    f.allowed_.set(player);
    return f;
  }
  bool operator()(std::uint8_t player) const noexcept { return allowed_.test(player); }

 private:
  std::bitset<256> allowed_;
};

/// Follows a replay log as it grows, yielding each complete record once.
class ReplayTailer {
 public:
  ReplayTailer(const std::filesystem::path& path, std::uint64_t from_offset = 0,
               PlayerFilter filter = PlayerFilter::all(),
               std::chrono::milliseconds poll_interval = std::chrono::milliseconds(10))
      : path_(path), offset_(from_offset), filter_(filter), poll_interval_(poll_interval) {
    fd_ = detail::FileDescriptor(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
    if (!fd_) throw IoError(detail::errno_text("open " + path.string()));
  }

  /// Byte offset of the first record not yet yielded.
  std::uint64_t offset() const noexcept { return offset_; }

  /// Non-blocking: every record completed since the last call, in file order.
  std::vector<ReplayRecord> poll() {
    fill();
    std::vector<ReplayRecord> out;
    std::size_t pos = 0;
    while (pos < pending_.size()) {
      std::size_t used = 0;
      auto rec = parse_record(std::span(pending_).subspan(pos), offset_, &used);
      if (!rec) break;
      pos += used;
      offset_ += used;
      if (filter_(rec->player)) out.push_back(std::move(*rec));
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
  }

  /// Blocks (polling) until at least one record is available or the timeout
  /// passes; a truncated trailing record is waited on, not reported.
  std::vector<ReplayRecord> wait(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      auto recs = poll();
      if (!recs.empty() || std::chrono::steady_clock::now() >= deadline) return recs;
      std::this_thread::sleep_for(poll_interval_);
    }
  }

 private:
  void fill() {
    std::uint8_t chunk[1 << 16];
    for (;;) {
      const auto at = static_cast<off_t>(offset_ + pending_.size());
      const ssize_t n = ::pread(fd_.get(), chunk, sizeof chunk, at);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(detail::errno_text("read " + path_.string()));
      }
      if (n == 0) return;
      pending_.insert(pending_.end(), chunk, chunk + n);
    }
  }

  std::filesystem::path path_;
  detail::FileDescriptor fd_;
  std::uint64_t offset_;
  PlayerFilter filter_;
  std::chrono::milliseconds poll_interval_;
  std::vector<std::uint8_t> pending_;
};

}  // namespace castle
