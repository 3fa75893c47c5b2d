#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chargescope/apphand.hpp"
#include "chargescope/capture.hpp"
#include "chargescope/evse_sim.hpp"
#include "chargescope/market.hpp"
#include "chargescope/net.hpp"
#include "chargescope/slac/session.hpp"
#include "chargescope/tls.hpp"
#include "chargescope/v2gtp.hpp"

namespace chargescope::orchestrator {

/// What one test cycle asks of the station.
struct ScenarioSpec {
  int id = 1;
  v2gtp::Security sdp_security = v2gtp::Security::NoTls;
  std::vector<apphand::AppProtocolEntry> entries;
};

/// 1: TLS-only discovery, then the handshake inside TLS offering all
///    protocols. 2: ISO 15118-2 only. 3: all protocols ranked
///    ISO 15118-20 > ISO 15118-2 > DIN 70121, to expose the preference.
/// 4: DIN 70121 only.
const std::vector<ScenarioSpec>& standard_scenarios();
const ScenarioSpec& scenario(int id);

struct StationInfo {
  std::string id;
  market::ClusterKey cluster;
  std::string model;
  std::optional<int> install_year;
  std::string year_label;

  bool operator==(const StationInfo&) const = default;
};

struct SdpResult {
  bool discovered = false;
  std::optional<v2gtp::Security> security;
  bool downgraded = false;
  int attempts = 0;
  std::optional<std::string> endpoint;
  std::vector<std::string> warnings;

  bool operator==(const SdpResult&) const = default;
};

/// Compact record of the TLS attempt that goes into reports.
struct TlsSummary {
  bool handshake_ok = false;
  std::string tls_version;
  std::string cipher_suite;
  std::vector<tls::CertificateSummary> presented_chain;
  bool chain_valid = false;
  std::optional<std::string> matched_root;
  std::vector<std::string> chain_problems;
  std::optional<std::string> failure_stage;
  std::string detail;

  bool operator==(const TlsSummary&) const = default;
};

TlsSummary summarize(const tls::TlsProbeResult& r);

struct ScenarioOutcome {
  int scenario_id = 1;
  v2gtp::Security requested_security = v2gtp::Security::NoTls;
  std::vector<apphand::Protocol> advertised;
  int slac_attempts = 0;
  bool slac_matched = false;
  std::optional<std::string> slac_failed_stage;
  SdpResult sdp;
  std::optional<TlsSummary> tls;
  std::optional<apphand::HandshakeResponse> handshake;
  std::optional<apphand::Protocol> chosen_protocol;
  /// First stage that failed: slac, sdp, sdp_downgrade, tcp, tls, handshake.
  std::optional<std::string> failure;
  std::string detail;
  std::string transcript_ref;

  bool operator==(const ScenarioOutcome&) const = default;
};

struct DerivedFlags {
  bool supports_tls = false;
  bool supports_iso2 = false;
  bool supports_din = false;
  std::optional<apphand::Protocol> preferred_protocol;
  std::optional<bool> chain_valid;

  bool operator==(const DerivedFlags&) const = default;
};

/// Pure function of the outcomes; scenario order is irrelevant.
DerivedFlags derive_flags(const std::vector<ScenarioOutcome>& outcomes);

struct StationReport {
  StationInfo station;
  std::vector<ScenarioOutcome> scenarios;  // sorted by scenario_id
  DerivedFlags derived;
  std::vector<std::string> captures;

  bool operator==(const StationReport&) const = default;
};

nlohmann::json to_json(const StationReport& r);
/// Throws FormatVersionError / ArtifactError.
StationReport station_report_from_json(const nlohmann::json& j);
/// Reads every *.json StationReport in `dir`, ordered by file name.
std::vector<StationReport> load_reports(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Targets

/// Transports for one fresh session with the station.
struct TargetSession {
  std::unique_ptr<MessageChannel> slac;
  std::unique_ptr<MessageChannel> sdp;
  std::function<std::unique_ptr<ByteStream>(const Endpoint&, Clock::time_point)> connect;
  slac::ControlPilot* control_pilot = nullptr;
  /// EV MAC to use for SLAC when the link dictates one.
  std::optional<MacAddress> local_mac;
  /// Tears the session down; called once, after the EV side is done.
  std::function<void()> finish;
};

class Target {
 public:
  virtual ~Target() = default;
  virtual StationInfo station() const = 0;
  /// A new session with the pilot already in state B. `log` is the EV-side
  /// transcript for that session.
  virtual TargetSession open(int scenario_id, CaptureLog& log) = 0;
};

/// Record of one simulator session, kept for transcript checks.
struct SimulatorRun {
  int scenario_id = 0;
  std::shared_ptr<CaptureLog> log;
  evse::EvseSessionLog session;
  std::vector<slac::BasicSignalingEvent> pilot_history;
  std::optional<std::string> error;
};

/// The simulator behind in-process transports, one thread per session.
class DeskTarget final : public Target {
 public:
  explicit DeskTarget(evse::EvseProfile profile, evse::EvseOptions options = {});
  ~DeskTarget() override;

  StationInfo station() const override;
  TargetSession open(int scenario_id, CaptureLog& log) override;

  const evse::EvseProfile& profile() const { return profile_; }
  std::vector<SimulatorRun> runs() const;

 private:
  struct Impl;
  evse::EvseProfile profile_;
  evse::EvseOptions options_;
  std::unique_ptr<Impl> impl_;
};

/// Field station reached through a network interface: SLAC over a raw
/// HomePlug socket, SDP by UDP multicast, TCP to the discovered endpoint.
struct LiveTargetConfig {
  std::string interface;
  StationInfo station;
};

class LiveTarget final : public Target {
 public:
  explicit LiveTarget(LiveTargetConfig config);

  StationInfo station() const override { return config_.station; }
  TargetSession open(int scenario_id, CaptureLog& log) override;

 private:
  LiveTargetConfig config_;
};

// ---------------------------------------------------------------------------
// Running

struct RunConfig {
  slac::SlacConfig slac;
  int slac_retries = 1;
  int sdp_retries = 3;
  Millis sdp_timeout{250};
  Millis tcp_timeout{2000};
  Millis message_timeout{2000};
  tls::TrustStore trust;
  tls::ClientPolicy tls_policy;
  std::vector<int> order{1, 2, 3, 4};
  /// When set, transcripts are written there as <station>-s<N>.jsonl/.pcap.
  std::optional<std::filesystem::path> capture_dir;
};

/// Called once per session attempt with the EV-side transcript.
using TranscriptSink = std::function<void(int scenario_id, const CaptureLog& log)>;

ScenarioOutcome run_scenario(Target& target, const ScenarioSpec& spec, const RunConfig& config,
                             const TranscriptSink& sink = {});
StationReport run_station_test(Target& target, const RunConfig& config,
                               const TranscriptSink& sink = {});

// ---------------------------------------------------------------------------
// Assumption checks

enum class Dimension { A1_manufacturer_capability, A2_cpo_configuration };

std::string to_string(Dimension d);

struct WitnessPair {
  std::string first;
  std::string second;
  std::vector<std::string> differing;  // flag names

  bool operator==(const WitnessPair&) const = default;
};

struct ConsistencyFinding {
  market::ClusterKey cluster;  // A1: cpo is "*"
  Dimension dimension = Dimension::A2_cpo_configuration;
  bool consistent = true;
  bool insufficient_sample = false;
  std::size_t reports = 0;
  std::vector<WitnessPair> witnesses;

  bool operator==(const ConsistencyFinding&) const = default;
};

/// A2: per cluster with at least two reports, stations are compared on
/// (supports_tls, supports_iso2, supports_din, preferred_protocol). Each
/// station that differs from the cluster majority is paired with the first
/// majority station. A1: per manufacturer, clusters are compared on the
/// union of observed protocol support. Groups with one member yield an
/// insufficient_sample finding.
std::vector<ConsistencyFinding> validate_assumptions(const std::vector<StationReport>& reports);

nlohmann::json to_json(const std::vector<ConsistencyFinding>& findings);

// ---------------------------------------------------------------------------
// Transcript checks

struct TranscriptViolation {
  std::uint64_t seq = 0;
  std::string reason;
};

/// Flags anything past the application-protocol handshake: V2GTP messages
/// other than one supportedAppProtocolReq/Res pair per direction, messages
/// a simulator ignored after negotiation, and any control pilot state C.
std::vector<TranscriptViolation> scan_transcript(const std::vector<CaptureEntry>& entries);

}  // namespace chargescope::orchestrator
