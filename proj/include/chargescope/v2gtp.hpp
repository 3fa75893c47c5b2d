#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chargescope/bytes.hpp"
#include "chargescope/capture.hpp"
#include "chargescope/expected.hpp"
#include "chargescope/net.hpp"
#include "chargescope/transport.hpp"

namespace chargescope::v2gtp {

// V2G Transfer Protocol constants (ISO 15118-2:2014 clause 7.8.3, identical
// in DIN SPEC 70121). Cross-checked against an independent open-source
// ISO 15118 implementation; see tests/vectors/sdp_vectors.txt.
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::uint8_t kInverseProtocolVersion = 0xFE;
inline constexpr std::uint16_t kPayloadExi = 0x8001;
inline constexpr std::uint16_t kPayloadSdpRequest = 0x9000;
inline constexpr std::uint16_t kPayloadSdpResponse = 0x9001;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::uint16_t kSdpServerPort = 15118;
inline constexpr std::size_t kSdpRequestPayloadSize = 2;
inline constexpr std::size_t kSdpResponsePayloadSize = 20;
inline constexpr std::uint16_t kDynamicPortMin = 49152;

struct V2gtpMessage {
  std::uint8_t version = kProtocolVersion;
  std::uint8_t inverse_version = kInverseProtocolVersion;
  std::uint16_t payload_type = 0;
  Bytes payload;

  bool operator==(const V2gtpMessage&) const = default;
};

enum class V2gtpErrorKind { truncated, bad_header, wrong_payload_type, bad_length, bad_value };

struct V2gtpError {
  V2gtpErrorKind kind;
  std::string detail;
};

std::string to_string(V2gtpErrorKind k);

Bytes encode_v2gtp(const V2gtpMessage& msg);
Bytes encode_v2gtp(std::uint16_t payload_type, ByteView payload);
/// Decodes one complete datagram; trailing bytes are a length error.
Expected<V2gtpMessage, V2gtpError> decode_v2gtp(ByteView bytes);

enum class Security : std::uint8_t { TlsRequired = 0x00, NoTls = 0x10 };
enum class TransportProtocol : std::uint8_t { Tcp = 0x00 };

std::string to_string(Security s);

struct SdpRequest {
  Security security = Security::TlsRequired;
  TransportProtocol transport = TransportProtocol::Tcp;

  bool operator==(const SdpRequest&) const = default;
};

struct SdpResponse {
  std::array<std::uint8_t, 16> endpoint_ip{};
  std::uint16_t endpoint_port = 0;
  Security security = Security::TlsRequired;
  TransportProtocol transport = TransportProtocol::Tcp;

  bool operator==(const SdpResponse&) const = default;
  Endpoint endpoint() const;
};

Bytes encode_sdp_request(const SdpRequest& req);
Expected<SdpRequest, V2gtpError> decode_sdp_request(ByteView bytes);
Bytes encode_sdp_response(const SdpResponse& res);
Expected<SdpResponse, V2gtpError> decode_sdp_response(ByteView bytes);

struct SdpOutcome {
  std::optional<SdpResponse> response;
  bool downgraded = false;
  int attempts = 0;
  std::vector<std::string> warnings;

  bool discovered() const { return response.has_value(); }
};

/// Sends `req` up to `retries` times, waiting `timeout` for each answer, and
/// returns the first well-formed response. A response whose security differs
/// from the request is flagged as a downgrade, never silently accepted.
SdpOutcome sdp_discover(MessageChannel& channel, const SdpRequest& req, int retries,
                        Millis timeout, CaptureLog& log);

/// Stream framing for EXI payloads over TCP or TLS.
void write_message(ByteStream& stream, std::uint16_t payload_type, ByteView payload,
                   CaptureLog* log = nullptr, const std::string& summary = {});
Expected<V2gtpMessage, V2gtpError> read_message(ByteStream& stream, Clock::time_point deadline,
                                                std::size_t max_payload = 65536);

}  // namespace chargescope::v2gtp
