#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "chargescope/transport.hpp"

namespace chargescope {

/// IPv6 endpoint; IPv4 peers are carried as IPv4-mapped addresses (::ffff:a.b.c.d).
struct Endpoint {
  std::array<std::uint8_t, 16> address{};
  std::uint16_t port = 0;
  std::uint32_t scope_id = 0;

  bool operator==(const Endpoint&) const = default;
};

/// Parses "::1", "fe80::1%eth0", "127.0.0.1" (mapped) and friends.
/// Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& host, std::uint16_t port);
std::string endpoint_to_string(const Endpoint& ep);
bool is_ipv4_mapped(const Endpoint& ep);

/// RAII file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int get() const { return fd_; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset();

 private:
  int fd_ = -1;
};

/// UDP datagram channel bound to `local`, talking to `peer`. Replies are
/// accepted from any source; the first datagram from a new source does not
/// retarget sends unless `follow_peer` is set (server side).
class UdpChannel final : public MessageChannel {
 public:
  UdpChannel(const Endpoint& local, const Endpoint& peer, bool follow_peer = false);

  void send(ByteView message) override;
  std::optional<Bytes> receive(Clock::time_point deadline) override;
  void close() override;

  Endpoint local_endpoint() const;

 private:
  Socket sock_;
  Endpoint peer_;
  bool follow_peer_;
  bool peer_known_;
};

class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(Socket sock) : sock_(std::move(sock)) {}
  /// Throws TransportError on refusal or deadline expiry.
  static std::unique_ptr<TcpStream> connect(const Endpoint& remote, Clock::time_point deadline);

  void write(ByteView data) override;
  ReadResult read(std::span<std::uint8_t> out, Clock::time_point deadline) override;
  void close() override;

 private:
  Socket sock_;
};

class TcpListener {
 public:
  /// Throws TransportError when the address cannot be bound.
  explicit TcpListener(const Endpoint& local);
  /// Returns nullptr on deadline expiry.
  std::unique_ptr<TcpStream> accept(Clock::time_point deadline);
  Endpoint local_endpoint() const;

 private:
  Socket sock_;
};

/// Raw Ethernet frames of one ethertype on a named interface (AF_PACKET).
/// Needs CAP_NET_RAW. Frames are sent and received whole, headers included.
class RawEthernetChannel final : public MessageChannel {
 public:
  /// Throws TransportError when the socket cannot be opened or bound.
  RawEthernetChannel(const std::string& interface, std::uint16_t ethertype);

  void send(ByteView frame) override;
  std::optional<Bytes> receive(Clock::time_point deadline) override;
  void close() override;

  std::array<std::uint8_t, 6> mac() const { return mac_; }
  unsigned ifindex() const { return ifindex_; }

 private:
  Socket sock_;
  unsigned ifindex_ = 0;
  std::array<std::uint8_t, 6> mac_{};
};

/// Interface index for a name such as "eth0"; throws std::invalid_argument.
unsigned interface_index(const std::string& name);

}  // namespace chargescope
