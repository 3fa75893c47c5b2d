#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>

#include "chargescope/bytes.hpp"

namespace chargescope {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::milliseconds;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered, message-oriented duplex channel. Carries SLAC frames and SDP
/// datagrams. Delivery may be lossy; ordering per direction is guaranteed.
class MessageChannel {
 public:
  virtual ~MessageChannel() = default;
  virtual void send(ByteView message) = 0;
  /// Returns nullopt on deadline expiry or when the peer has closed.
  virtual std::optional<Bytes> receive(Clock::time_point deadline) = 0;
  virtual void close() = 0;
};

enum class ReadStatus { ok, eof, timeout };

struct ReadResult {
  ReadStatus status = ReadStatus::ok;
  std::size_t size = 0;
};

/// Reliable, ordered byte stream (TCP, or TLS on top of one).
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Throws TransportError when the stream is closed.
  virtual void write(ByteView data) = 0;
  virtual ReadResult read(std::span<std::uint8_t> out, Clock::time_point deadline) = 0;
  virtual void close() = 0;
};

/// Reads exactly out.size() bytes or reports why it could not.
ReadStatus read_exact(ByteStream& stream, std::span<std::uint8_t> out,
                      Clock::time_point deadline);

/// Decides whether a message sent in one direction is dropped. Used to
/// emulate a lossy powerline link or to inject faults.
using DropFilter = std::function<bool(ByteView)>;

/// Creates two connected in-process message channel endpoints.
std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>>
make_in_process_channel_pair(DropFilter a_to_b = {}, DropFilter b_to_a = {});

/// Creates two connected in-process byte stream endpoints.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_in_process_stream_pair();

}  // namespace chargescope
