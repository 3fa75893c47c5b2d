#include "chargescope/capture.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace chargescope {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::tx: return "tx";
    case Direction::rx: return "rx";
    case Direction::event: return "event";
  }
  return "?";
}

std::string to_string(Layer l) {
  switch (l) {
    case Layer::control_pilot: return "cp";
    case Layer::slac: return "slac";
    case Layer::sdp: return "sdp";
    case Layer::tcp: return "tcp";
    case Layer::tls_record: return "tls";
    case Layer::v2gtp: return "v2gtp";
  }
  return "?";
}

void CaptureLog::record(Direction dir, Layer layer, ByteView data, std::string summary) {
  std::lock_guard lock(mu_);
  CaptureEntry e;
  e.seq = entries_.size();
  e.direction = dir;
  e.layer = layer;
  e.timestamp = std::chrono::system_clock::now();
  e.data.assign(data.begin(), data.end());
  e.summary = std::move(summary);
  entries_.push_back(std::move(e));
}

void CaptureLog::event(Layer layer, std::string summary) {
  record(Direction::event, layer, {}, std::move(summary));
}

std::vector<CaptureEntry> CaptureLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t CaptureLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string CaptureLog::to_json_lines() const {
  std::string out;
  for (const auto& e : entries()) {
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                  e.timestamp.time_since_epoch())
                  .count();
    nlohmann::json j = {{"seq", e.seq},
                        {"direction", to_string(e.direction)},
                        {"layer", to_string(e.layer)},
                        {"timestamp_us", us},
                        {"hex", to_hex(e.data)},
                        {"summary", e.summary}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void CaptureLog::write_json_lines(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json_lines();
}

void CaptureLog::write_pcap(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  auto put32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  // Native-endian header; readers detect byte order from the magic.
  put32(0xa1b2c3d4);
  put16(2);
  put16(4);
  put32(0);
  put32(0);
  put32(65535);
  put32(1);
  for (const auto& e : entries()) {
    if (e.layer != Layer::slac || e.direction == Direction::event) continue;
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                  e.timestamp.time_since_epoch())
                  .count();
    put32(static_cast<std::uint32_t>(us / 1000000));
    put32(static_cast<std::uint32_t>(us % 1000000));
    put32(static_cast<std::uint32_t>(e.data.size()));
    put32(static_cast<std::uint32_t>(e.data.size()));
    f.write(reinterpret_cast<const char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size()));
  }
}

}  // namespace chargescope
