#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "chargescope/bytes.hpp"

namespace chargescope {

enum class Direction { tx, rx, event };

/// Protocol layer a capture entry belongs to. The transcript scanner relies
/// on this to decide which decoder applies.
enum class Layer { control_pilot, slac, sdp, tcp, tls_record, v2gtp };

std::string to_string(Direction d);
std::string to_string(Layer l);

struct CaptureEntry {
  std::uint64_t seq = 0;
  Direction direction = Direction::tx;
  Layer layer = Layer::slac;
  std::chrono::system_clock::time_point timestamp;
  Bytes data;
  std::string summary;
};

/// Ordered per-endpoint transcript. Thread-safe; entries are numbered in
/// the order they were recorded.
class CaptureLog {
 public:
  void record(Direction dir, Layer layer, ByteView data, std::string summary);
  void event(Layer layer, std::string summary);

  std::vector<CaptureEntry> entries() const;
  std::size_t size() const;

  /// One JSON object per line: {seq, direction, layer, timestamp, hex, summary}.
  std::string to_json_lines() const;
  void write_json_lines(const std::filesystem::path& path) const;
  /// Classic pcap (DLT_EN10MB) of the SLAC frames, readable by Wireshark.
  void write_pcap(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mu_;
  std::vector<CaptureEntry> entries_;
};

}  // namespace chargescope
