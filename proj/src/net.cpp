#include "chargescope/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <net/if.h>
#include <netinet/in.h>
#include <linux/if_packet.h>
#include <poll.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace chargescope {

namespace {

sockaddr_in6 to_sockaddr(const Endpoint& ep) {
  sockaddr_in6 sa{};
  sa.sin6_family = AF_INET6;
  sa.sin6_port = htons(ep.port);
  std::memcpy(&sa.sin6_addr, ep.address.data(), 16);
  sa.sin6_scope_id = ep.scope_id;
  return sa;
}

Endpoint from_sockaddr(const sockaddr_in6& sa) {
  Endpoint ep;
  std::memcpy(ep.address.data(), &sa.sin6_addr, 16);
  ep.port = ntohs(sa.sin6_port);
  ep.scope_id = sa.sin6_scope_id;
  return ep;
}

Socket make_socket(int type) {
  Socket s(::socket(AF_INET6, type | SOCK_CLOEXEC, 0));
  if (s.get() < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  int off = 0;
  ::setsockopt(s.get(), IPPROTO_IPV6, IPV6_V6ONLY, &off, sizeof(off));
  return s;
}

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
  return static_cast<int>(std::clamp<long long>(left, 0, 1 << 30));
}

// Waits for `events` on fd; false on deadline expiry.
bool wait_fd(int fd, short events, Clock::time_point deadline) {
  for (;;) {
    pollfd p{fd, events, 0};
    int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw TransportError(std::string("poll: ") + std::strerror(errno));
  }
}

Endpoint local_of(int fd) {
  sockaddr_in6 sa{};
  socklen_t len = sizeof(sa);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return from_sockaddr(sa);
}

}  // namespace

Endpoint parse_endpoint(const std::string& host, std::uint16_t port) {
  Endpoint ep;
  ep.port = port;
  std::string addr = host;
  if (auto pct = addr.find('%'); pct != std::string::npos) {
    std::string iface = addr.substr(pct + 1);
    addr.resize(pct);
    ep.scope_id = ::if_nametoindex(iface.c_str());
    if (ep.scope_id == 0) throw std::invalid_argument("unknown interface: " + iface);
  }
  in6_addr a6{};
  in_addr a4{};
  if (::inet_pton(AF_INET6, addr.c_str(), &a6) == 1) {
    std::memcpy(ep.address.data(), &a6, 16);
  } else if (::inet_pton(AF_INET, addr.c_str(), &a4) == 1) {
    ep.address[10] = 0xFF;
    ep.address[11] = 0xFF;
    std::memcpy(ep.address.data() + 12, &a4, 4);
  } else {
    throw std::invalid_argument("not an IP address: " + host);
  }
  return ep;
}

bool is_ipv4_mapped(const Endpoint& ep) {
  for (int i = 0; i < 10; ++i) {
    if (ep.address[i] != 0) return false;
  }
  return ep.address[10] == 0xFF && ep.address[11] == 0xFF;
}

std::string endpoint_to_string(const Endpoint& ep) {
  char buf[INET6_ADDRSTRLEN] = {};
  if (is_ipv4_mapped(ep)) {
    ::inet_ntop(AF_INET, ep.address.data() + 12, buf, sizeof(buf));
    return std::string(buf) + ":" + std::to_string(ep.port);
  }
  ::inet_ntop(AF_INET6, ep.address.data(), buf, sizeof(buf));
  return "[" + std::string(buf) + "]:" + std::to_string(ep.port);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    reset();
    fd_ = other.release();
  }
  return *this;
}

Socket::~Socket() { reset(); }

void Socket::reset() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

UdpChannel::UdpChannel(const Endpoint& local, const Endpoint& peer, bool follow_peer)
    : sock_(make_socket(SOCK_DGRAM)),
      peer_(peer),
      follow_peer_(follow_peer),
      peer_known_(peer.port != 0) {
  int on = 1;
  ::setsockopt(sock_.get(), SOL_SOCKET, SO_REUSEADDR, &on, sizeof(on));
  auto sa = to_sockaddr(local);
  if (::bind(sock_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    throw TransportError("bind " + endpoint_to_string(local) + ": " + std::strerror(errno));
  }
}

void UdpChannel::send(ByteView message) {
  if (sock_.get() < 0) throw TransportError("udp channel closed");
  if (!peer_known_) throw TransportError("udp peer unknown");
  auto sa = to_sockaddr(peer_);
  ::sendto(sock_.get(), message.data(), message.size(), 0, reinterpret_cast<sockaddr*>(&sa),
           sizeof(sa));
}

std::optional<Bytes> UdpChannel::receive(Clock::time_point deadline) {
  if (sock_.get() < 0) return std::nullopt;
  if (!wait_fd(sock_.get(), POLLIN, deadline)) return std::nullopt;
  Bytes buf(65536);
  sockaddr_in6 from{};
  socklen_t len = sizeof(from);
  auto n = ::recvfrom(sock_.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from),
                      &len);
  if (n < 0) return std::nullopt;
  buf.resize(static_cast<std::size_t>(n));
  if (follow_peer_ || !peer_known_) {
    peer_ = from_sockaddr(from);
    peer_known_ = true;
  }
  return buf;
}

void UdpChannel::close() { sock_.reset(); }

Endpoint UdpChannel::local_endpoint() const { return local_of(sock_.get()); }

std::unique_ptr<TcpStream> TcpStream::connect(const Endpoint& remote, Clock::time_point deadline) {
  Socket s = make_socket(SOCK_STREAM);
  ::fcntl(s.get(), F_SETFL, ::fcntl(s.get(), F_GETFL) | O_NONBLOCK);
  auto sa = to_sockaddr(remote);
  int rc = ::connect(s.get(), reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
  if (rc != 0 && errno != EINPROGRESS) {
    throw TransportError("connect " + endpoint_to_string(remote) + ": " + std::strerror(errno));
  }
  if (rc != 0) {
    if (!wait_fd(s.get(), POLLOUT, deadline)) {
      throw TransportError("connect " + endpoint_to_string(remote) + ": timeout");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(s.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw TransportError("connect " + endpoint_to_string(remote) + ": " + std::strerror(err));
    }
  }
  return std::make_unique<TcpStream>(std::move(s));
}

void TcpStream::write(ByteView data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    if (sock_.get() < 0) throw TransportError("tcp stream closed");
    auto n = ::send(sock_.get(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        wait_fd(sock_.get(), POLLOUT, Clock::now() + Millis(5000));
        continue;
      }
      if (errno == EINTR) continue;
      throw TransportError(std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

ReadResult TcpStream::read(std::span<std::uint8_t> out, Clock::time_point deadline) {
  if (sock_.get() < 0) return {ReadStatus::eof, 0};
  for (;;) {
    if (!wait_fd(sock_.get(), POLLIN, deadline)) return {ReadStatus::timeout, 0};
    auto n = ::recv(sock_.get(), out.data(), out.size(), 0);
    if (n > 0) return {ReadStatus::ok, static_cast<std::size_t>(n)};
    if (n == 0) return {ReadStatus::eof, 0};
    if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
    return {ReadStatus::eof, 0};
  }
}

void TcpStream::close() {
  if (sock_.get() >= 0) ::shutdown(sock_.get(), SHUT_RDWR);
  sock_.reset();
}

TcpListener::TcpListener(const Endpoint& local) : sock_(make_socket(SOCK_STREAM)) {
  int on = 1;
  ::setsockopt(sock_.get(), SOL_SOCKET, SO_REUSEADDR, &on, sizeof(on));
  auto sa = to_sockaddr(local);
  if (::bind(sock_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
      ::listen(sock_.get(), 4) != 0) {
    throw TransportError("listen " + endpoint_to_string(local) + ": " + std::strerror(errno));
  }
}

std::unique_ptr<TcpStream> TcpListener::accept(Clock::time_point deadline) {
  if (!wait_fd(sock_.get(), POLLIN, deadline)) return nullptr;
  int fd = ::accept4(sock_.get(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpStream>(Socket(fd));
}

Endpoint TcpListener::local_endpoint() const { return local_of(sock_.get()); }

unsigned interface_index(const std::string& name) {
  unsigned idx = ::if_nametoindex(name.c_str());
  if (idx == 0) throw std::invalid_argument("unknown interface: " + name);
  return idx;
}

RawEthernetChannel::RawEthernetChannel(const std::string& interface, std::uint16_t ethertype)
    : sock_(::socket(AF_PACKET, SOCK_RAW, htons(ethertype))) {
  if (sock_.get() < 0) {
    throw TransportError("raw socket: " + std::string(std::strerror(errno)) +
                         " (needs CAP_NET_RAW)");
  }
  ifindex_ = interface_index(interface);
  ifreq ifr{};
  std::strncpy(ifr.ifr_name, interface.c_str(), IFNAMSIZ - 1);
  if (::ioctl(sock_.get(), SIOCGIFHWADDR, &ifr) != 0) {
    throw TransportError("cannot read MAC of " + interface);
  }
  std::memcpy(mac_.data(), ifr.ifr_hwaddr.sa_data, mac_.size());
  sockaddr_ll sll{};
  sll.sll_family = AF_PACKET;
  sll.sll_protocol = htons(ethertype);
  sll.sll_ifindex = static_cast<int>(ifindex_);
  if (::bind(sock_.get(), reinterpret_cast<sockaddr*>(&sll), sizeof(sll)) != 0) {
    throw TransportError("bind " + interface + ": " + std::strerror(errno));
  }
}

void RawEthernetChannel::send(ByteView frame) {
  if (sock_.get() < 0) throw TransportError("raw channel closed");
  if (frame.size() < 14) throw TransportError("frame shorter than an Ethernet header");
  sockaddr_ll sll{};
  sll.sll_family = AF_PACKET;
  sll.sll_ifindex = static_cast<int>(ifindex_);
  sll.sll_halen = 6;
  std::memcpy(sll.sll_addr, frame.data(), 6);
  if (::sendto(sock_.get(), frame.data(), frame.size(), 0, reinterpret_cast<sockaddr*>(&sll),
               sizeof(sll)) < 0) {
    throw TransportError(std::string("sendto: ") + std::strerror(errno));
  }
}

std::optional<Bytes> RawEthernetChannel::receive(Clock::time_point deadline) {
  if (sock_.get() < 0) return std::nullopt;
  if (!wait_fd(sock_.get(), POLLIN, deadline)) return std::nullopt;
  Bytes buf(1600);
  auto n = ::recv(sock_.get(), buf.data(), buf.size(), 0);
  if (n < 0) return std::nullopt;
  buf.resize(static_cast<std::size_t>(n));
  return buf;
}

void RawEthernetChannel::close() { sock_.reset(); }

}  // namespace chargescope
