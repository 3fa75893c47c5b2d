#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chargescope/bytes.hpp"
#include "chargescope/expected.hpp"

namespace chargescope::apphand {

/// Charging protocols the probe can advertise. ISO 15118-20 is
/// advertisement-only; no -20 session messages are ever sent.
enum class Protocol { din70121, iso15118_2, iso15118_20 };

struct ProtocolInfo {
  Protocol protocol;
  std::string_view name;
  std::string_view namespace_uri;
  std::uint32_t version_major;
  std::uint32_t version_minor;
};

// Message-definition namespaces from DIN SPEC 70121:2014, ISO 15118-2:2014
// and ISO 15118-20:2022 (DC variant used for CCS DC charging).
inline constexpr ProtocolInfo kProtocols[] = {
    {Protocol::din70121, "DIN70121", "urn:din:70121:2012:MsgDef", 2, 0},
    {Protocol::iso15118_2, "ISO15118_2", "urn:iso:15118:2:2013:MsgDef", 2, 0},
    {Protocol::iso15118_20, "ISO15118_20", "urn:iso:std:iso:15118:-20:DC", 1, 0},
};
inline constexpr std::string_view kIso15118_20AcNamespace = "urn:iso:std:iso:15118:-20:AC";

const ProtocolInfo& info(Protocol p);
std::string to_string(Protocol p);
/// Accepts the canonical names (e.g. "ISO15118_2"); throws std::invalid_argument.
Protocol protocol_from_string(const std::string& name);
std::optional<Protocol> protocol_for_namespace(std::string_view ns);

inline constexpr std::size_t kMaxEntries = 20;
inline constexpr std::size_t kMaxNamespaceLength = 100;

struct AppProtocolEntry {
  std::string namespace_uri;
  std::uint32_t version_major = 0;
  std::uint32_t version_minor = 0;
  std::uint8_t schema_id = 0;
  std::uint8_t priority = 1;  // 1 = highest

  bool operator==(const AppProtocolEntry&) const = default;
};

AppProtocolEntry make_entry(Protocol p, std::uint8_t schema_id, std::uint8_t priority);

enum class ResponseCode : std::uint8_t {
  OkSuccessfulNegotiation = 0,
  OkSuccessfulNegotiationWithMinorDeviation = 1,
  FailedNoNegotiation = 2,
};

std::string to_string(ResponseCode c);

struct HandshakeResponse {
  ResponseCode response_code = ResponseCode::FailedNoNegotiation;
  std::optional<std::uint8_t> chosen_schema_id;

  bool operator==(const HandshakeResponse&) const = default;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExiError {
  std::size_t bit_offset = 0;
  std::string detail;
};

/// Throws ValidationError for 0 or more than 20 entries, duplicate
/// schema_id/priority, priority outside 1..20, or an empty/oversized
/// namespace.
void validate_request(std::span<const AppProtocolEntry> entries);
void validate_response(const HandshakeResponse& res);

// supportedAppProtocolReq/Res EXI codec (schema-informed, bit-packed,
// default options, no EXI cookie or header options).
Bytes encode_handshake_request(std::span<const AppProtocolEntry> entries);
Expected<std::vector<AppProtocolEntry>, ExiError> decode_handshake_request(ByteView bytes);
Bytes encode_handshake_response(const HandshakeResponse& res);
Expected<HandshakeResponse, ExiError> decode_handshake_response(ByteView bytes);

struct SupportedProtocol {
  std::string namespace_uri;
  std::uint32_t version_major = 0;
  std::uint32_t version_minor = 0;
};

SupportedProtocol supported(Protocol p);

/// EVSE-side choice: among EV entries whose namespace and major version the
/// EVSE supports, take the one with the best (lowest) EV priority. An exact
/// minor match is a plain success, a differing minor a minor deviation.
HandshakeResponse select_protocol(std::span<const SupportedProtocol> evse_supported,
                                  std::span<const AppProtocolEntry> ev_entries);

/// Same, but an EVSE-preferred protocol wins whenever the EV offers it.
HandshakeResponse select_with_preference(std::span<const SupportedProtocol> evse_supported,
                                         const std::optional<SupportedProtocol>& preferred,
                                         std::span<const AppProtocolEntry> ev_entries);

/// Maps a response back to the protocol of the EV entry it chose.
std::optional<Protocol> chosen_protocol(const HandshakeResponse& res,
                                        std::span<const AppProtocolEntry> ev_entries);

}  // namespace chargescope::apphand
