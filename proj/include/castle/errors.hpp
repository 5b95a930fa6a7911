#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace castle {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A command violates the channel configuration (bad ids, coordinates, sizes).
class InvalidCommand : public Error {
 public:
  using Error::Error;
};

/// A numeric argument is outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A well-formed command could not have been produced by the encoder.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Not enough room on the map for the requested objects and region.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed map text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Corrupt replay-log bytes; carries the byte offset of the bad record.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class DegenerateMeasure : public Error {
 public:
  using Error::Error;
};

/// Operation on a closed or lost session.
class ChannelError : public Error {
 public:
  using Error::Error;
};

class SessionLost : public ChannelError {
 public:
  using ChannelError::ChannelError;
};

class JoinRejected : public Error {
 public:
  using Error::Error;
};

class FrameCorrupt : public Error {
 public:
  using Error::Error;
};

/// A message transfer was cut short; reports how much reached the peer.
class TransferError : public Error {
 public:
  TransferError(std::uint64_t delivered, const std::string& what)
      : Error(what + " after " + std::to_string(delivered) + " bytes delivered"),
        delivered_(delivered) {}
  std::uint64_t bytes_delivered() const noexcept { return delivered_; }

 private:
  std::uint64_t delivered_;
};

}  // namespace castle
