#include "chargescope/v2gtp.hpp"

#include <cstdio>

namespace chargescope::v2gtp {

std::string to_string(V2gtpErrorKind k) {
  switch (k) {
    case V2gtpErrorKind::truncated: return "truncated";
    case V2gtpErrorKind::bad_header: return "bad_header";
    case V2gtpErrorKind::wrong_payload_type: return "wrong_payload_type";
    case V2gtpErrorKind::bad_length: return "bad_length";
    case V2gtpErrorKind::bad_value: return "bad_value";
  }
  return "?";
}

std::string to_string(Security s) {
  return s == Security::TlsRequired ? "tls_required" : "no_tls";
}

Bytes encode_v2gtp(const V2gtpMessage& msg) {
  Bytes out;
  out.reserve(kHeaderSize + msg.payload.size());
  put_u8(out, msg.version);
  put_u8(out, msg.inverse_version);
  put_be16(out, msg.payload_type);
  put_be32(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

Bytes encode_v2gtp(std::uint16_t payload_type, ByteView payload) {
  return encode_v2gtp(V2gtpMessage{kProtocolVersion, kInverseProtocolVersion, payload_type,
                                   Bytes(payload.begin(), payload.end())});
}

namespace {

std::optional<V2gtpError> check_header(std::uint8_t version, std::uint8_t inverse) {
  if (version != kProtocolVersion || inverse != kInverseProtocolVersion) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "version 0x%02x / inverse 0x%02x", version, inverse);
    return V2gtpError{V2gtpErrorKind::bad_header, buf};
  }
  return std::nullopt;
}

std::optional<Security> security_from(std::uint8_t b) {
  if (b == 0x00) return Security::TlsRequired;
  if (b == 0x10) return Security::NoTls;
  return std::nullopt;
}

Expected<V2gtpMessage, V2gtpError> decode_typed(ByteView bytes, std::uint16_t type,
                                                std::size_t size) {
  auto msg = decode_v2gtp(bytes);
  if (!msg) return msg.error();
  if (msg->payload_type != type) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "payload type 0x%04x", msg->payload_type);
    return V2gtpError{V2gtpErrorKind::wrong_payload_type, buf};
  }
  if (msg->payload.size() != size) {
    return V2gtpError{V2gtpErrorKind::bad_length,
                      "payload of " + std::to_string(msg->payload.size()) + " bytes, expected " +
                          std::to_string(size)};
  }
  return msg;
}

}  // namespace

Expected<V2gtpMessage, V2gtpError> decode_v2gtp(ByteView bytes) {
  if (bytes.size() < kHeaderSize) {
    return V2gtpError{V2gtpErrorKind::truncated,
                      "header needs 8 bytes, got " + std::to_string(bytes.size())};
  }
  ByteReader r(bytes);
  V2gtpMessage msg;
  msg.version = r.u8();
  msg.inverse_version = r.u8();
  if (auto err = check_header(msg.version, msg.inverse_version)) return *err;
  msg.payload_type = r.be16();
  std::uint32_t length = r.be32();
  if (length != r.remaining()) {
    return V2gtpError{length > r.remaining() ? V2gtpErrorKind::truncated
                                             : V2gtpErrorKind::bad_length, "declared " + std::to_string(length) +
                                                      " payload bytes, got " +
                                                      std::to_string(r.remaining())};
  }
  msg.payload = r.rest();
  return msg;
}

Bytes encode_sdp_request(const SdpRequest& req) {
  Bytes payload{static_cast<std::uint8_t>(req.security), static_cast<std::uint8_t>(req.transport)};
  return encode_v2gtp(kPayloadSdpRequest, payload);
}

Expected<SdpRequest, V2gtpError> decode_sdp_request(ByteView bytes) {
  auto msg = decode_typed(bytes, kPayloadSdpRequest, kSdpRequestPayloadSize);
  if (!msg) return msg.error();
  auto sec = security_from(msg->payload[0]);
  if (!sec) return V2gtpError{V2gtpErrorKind::bad_value, "security byte"};
  if (msg->payload[1] != 0x00) return V2gtpError{V2gtpErrorKind::bad_value, "transport byte"};
  return SdpRequest{*sec, TransportProtocol::Tcp};
}

Bytes encode_sdp_response(const SdpResponse& res) {
  Bytes payload;
  payload.reserve(kSdpResponsePayloadSize);
  put_array(payload, res.endpoint_ip);
  put_be16(payload, res.endpoint_port);
  put_u8(payload, static_cast<std::uint8_t>(res.security));
  put_u8(payload, static_cast<std::uint8_t>(res.transport));
  return encode_v2gtp(kPayloadSdpResponse, payload);
}

Expected<SdpResponse, V2gtpError> decode_sdp_response(ByteView bytes) {
  auto msg = decode_typed(bytes, kPayloadSdpResponse, kSdpResponsePayloadSize);
  if (!msg) return msg.error();
  ByteReader r(msg->payload);
  SdpResponse res;
  res.endpoint_ip = r.array<16>();
  res.endpoint_port = r.be16();
  auto sec = security_from(r.u8());
  if (!sec) return V2gtpError{V2gtpErrorKind::bad_value, "security byte"};
  res.security = *sec;
  if (r.u8() != 0x00) return V2gtpError{V2gtpErrorKind::bad_value, "transport byte"};
  return res;
}

Endpoint SdpResponse::endpoint() const {
  Endpoint ep;
  ep.address = endpoint_ip;
  ep.port = endpoint_port;
  return ep;
}

SdpOutcome sdp_discover(MessageChannel& channel, const SdpRequest& req, int retries,
                        Millis timeout, CaptureLog& log) {
  SdpOutcome out;
  const Bytes wire = encode_sdp_request(req);
  for (int attempt = 0; attempt < std::max(retries, 1); ++attempt) {
    ++out.attempts;
    log.record(Direction::tx, Layer::sdp, wire, "SDP request security=" + to_string(req.security));
    channel.send(wire);
    const auto deadline = Clock::now() + timeout;
    while (Clock::now() < deadline) {
      auto datagram = channel.receive(deadline);
      if (!datagram) break;
      auto res = decode_sdp_response(*datagram);
      if (!res) {
        log.record(Direction::rx, Layer::sdp, *datagram,
                   "malformed SDP response: " + res.error().detail);
        continue;
      }
      log.record(Direction::rx, Layer::sdp, *datagram,
                 "SDP response " + endpoint_to_string(res->endpoint()) +
                     " security=" + to_string(res->security));
      if (res->endpoint_port < kDynamicPortMin) {
        out.warnings.push_back("SECC port " + std::to_string(res->endpoint_port) +
                               " outside the dynamic range");
      }
      out.downgraded = res->security != req.security;
      out.response = *res;
      return out;
    }
  }
  return out;
}

void write_message(ByteStream& stream, std::uint16_t payload_type, ByteView payload,
                   CaptureLog* log, const std::string& summary) {
  Bytes wire = encode_v2gtp(payload_type, payload);
  if (log) log->record(Direction::tx, Layer::v2gtp, wire, summary);
  stream.write(wire);
}

Expected<V2gtpMessage, V2gtpError> read_message(ByteStream& stream, Clock::time_point deadline,
                                                std::size_t max_payload) {
  std::array<std::uint8_t, kHeaderSize> header{};
  auto st = read_exact(stream, header, deadline);
  if (st != ReadStatus::ok) {
    return V2gtpError{V2gtpErrorKind::truncated,
                      st == ReadStatus::timeout ? "timeout reading header" : "stream closed"};
  }
  ByteReader r(header);
  V2gtpMessage msg;
  msg.version = r.u8();
  msg.inverse_version = r.u8();
  if (auto err = check_header(msg.version, msg.inverse_version)) return *err;
  msg.payload_type = r.be16();
  std::uint32_t length = r.be32();
  if (length > max_payload) {
    return V2gtpError{V2gtpErrorKind::bad_length, "payload length " + std::to_string(length)};
  }
  msg.payload.resize(length);
  st = read_exact(stream, msg.payload, deadline);
  if (st != ReadStatus::ok) return V2gtpError{V2gtpErrorKind::truncated, "payload cut short"};
  return msg;
}

}  // namespace chargescope::v2gtp
