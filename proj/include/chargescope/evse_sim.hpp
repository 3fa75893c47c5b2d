#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chargescope/apphand.hpp"
#include "chargescope/capture.hpp"
#include "chargescope/net.hpp"
#include "chargescope/slac/session.hpp"
#include "chargescope/transport.hpp"
#include "chargescope/v2gtp.hpp"

namespace chargescope::evse {

/// How a station answers an SDP request that asks for TLS.
enum class SdpPolicy { answer_tls, answer_plaintext_downgrade, silent };

std::string to_string(SdpPolicy p);
SdpPolicy sdp_policy_from_string(const std::string& s);

struct EvseProfile {
  std::string name;
  std::string cpo;
  std::string manufacturer;
  std::string model;
  std::optional<int> install_year;
  std::string year_label;  // as printed, e.g. "2019, 2025"
  std::vector<apphand::Protocol> supported_protocols;
  apphand::Protocol preferred_protocol = apphand::Protocol::iso15118_2;
  bool tls_enabled = false;
  SdpPolicy sdp_policy = SdpPolicy::answer_plaintext_downgrade;
  std::optional<std::string> certificate_chain;  // PEM: leaf, intermediates, key
  std::optional<std::string> chain_path;         // as written in the fixture
  slac::SlacFault slac_fault = slac::SlacFault::none;

  bool supports(apphand::Protocol p) const;
};

/// Message names the offending profile and field.
class ProfileError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void validate_profile(const EvseProfile& p);

/// chain_path entries are resolved against `base_dir` and loaded.
std::vector<EvseProfile> profiles_from_json(const nlohmann::json& j,
                                            const std::filesystem::path& base_dir);
std::vector<EvseProfile> load_profile_fixtures(const std::filesystem::path& file);
nlohmann::json to_json(const EvseProfile& p);

/// Transports for one simulated session.
struct EvseLinks {
  MessageChannel* slac = nullptr;
  MessageChannel* sdp = nullptr;
  /// Yields the next incoming TCP connection, or null on deadline expiry.
  std::function<std::unique_ptr<ByteStream>(Clock::time_point)> accept;
  /// Address and port put into SDP responses.
  Endpoint advertised;
};

struct EvseOptions {
  slac::EvseSlacConfig slac;
  Millis sdp_wait{2000};
  Millis connect_wait{2000};
  Millis message_wait{2000};
};

struct EvseSessionLog {
  slac::EvseSlacResult slac;
  std::vector<v2gtp::SdpRequest> sdp_requests;
  std::optional<v2gtp::SdpResponse> sdp_answer;
  bool tls_served = false;
  std::optional<std::vector<apphand::AppProtocolEntry>> handshake_request;
  std::optional<apphand::HandshakeResponse> handshake_response;
  /// Messages received after the handshake; never answered.
  int ignored_after_negotiation = 0;
  std::vector<std::string> notes;
};

/// Serves one probe session as the station described by `profile`: SLAC
/// (subject to slac_fault), SDP per sdp_policy, TLS when answered with it,
/// then supportedAppProtocol. Stops after the handshake. Throws
/// ProfileError for an invalid profile.
EvseSessionLog run_evse(const EvseProfile& profile, EvseLinks& links, CaptureLog& log,
                        const EvseOptions& options = {});

}  // namespace chargescope::evse
