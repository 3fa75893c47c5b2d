#include "chargescope/orchestrator.hpp"

#include <algorithm>
#include <fstream>

#include "chargescope/artifact.hpp"

namespace chargescope::orchestrator {

using apphand::Protocol;

const std::vector<ScenarioSpec>& standard_scenarios() {
  static const std::vector<ScenarioSpec> s = [] {
    using apphand::make_entry;
    std::vector<apphand::AppProtocolEntry> all{make_entry(Protocol::iso15118_20, 1, 1),
                                               make_entry(Protocol::iso15118_2, 2, 2),
                                               make_entry(Protocol::din70121, 3, 3)};
    return std::vector<ScenarioSpec>{
        {1, v2gtp::Security::TlsRequired, all},
        {2, v2gtp::Security::NoTls, {make_entry(Protocol::iso15118_2, 1, 1)}},
        {3, v2gtp::Security::NoTls, all},
        {4, v2gtp::Security::NoTls, {make_entry(Protocol::din70121, 1, 1)}},
    };
  }();
  return s;
}

const ScenarioSpec& scenario(int id) {
  for (const auto& s : standard_scenarios()) {
    if (s.id == id) return s;
  }
  throw std::invalid_argument("no scenario " + std::to_string(id));
}

TlsSummary summarize(const tls::TlsProbeResult& r) {
  TlsSummary s;
  s.handshake_ok = r.handshake_ok;
  s.tls_version = r.tls_version;
  s.cipher_suite = r.cipher_suite;
  s.presented_chain = r.presented_chain;
  s.chain_valid = r.chain_valid;
  s.matched_root = r.matched_root;
  s.chain_problems = r.chain_problems;
  if (r.failure_stage) s.failure_stage = tls::to_string(*r.failure_stage);
  s.detail = r.detail;
  return s;
}

DerivedFlags derive_flags(const std::vector<ScenarioOutcome>& outcomes) {
  DerivedFlags d;
  for (const auto& o : outcomes) {
    if (o.scenario_id == 1 && o.tls && o.tls->handshake_ok && !o.tls->presented_chain.empty()) {
      d.supports_tls = true;
      d.chain_valid = o.tls->chain_valid;
    }
    if (!o.chosen_protocol) continue;
    bool availability = o.scenario_id == 1 || o.scenario_id == 2 || o.scenario_id == 4;
    if (availability && *o.chosen_protocol == Protocol::iso15118_2) d.supports_iso2 = true;
    if (availability && *o.chosen_protocol == Protocol::din70121) d.supports_din = true;
    if (o.scenario_id == 3) d.preferred_protocol = o.chosen_protocol;
  }
  return d;
}

namespace {

// FNV-1a, so run ids do not depend on the standard library's hash.
slac::RunId derive_run_id(const std::string& station, int scenario_id, int attempt) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  for (char c : station) mix(static_cast<std::uint8_t>(c));
  mix(static_cast<std::uint8_t>(scenario_id));
  mix(static_cast<std::uint8_t>(attempt));
  slac::RunId id{};
  for (std::size_t i = 0; i < id.size(); ++i) id[i] = static_cast<std::uint8_t>(h >> (8 * i));
  return id;
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

void end_session(TargetSession& session) {
  if (session.slac) session.slac->close();
  if (session.sdp) session.sdp->close();
  session.connect = nullptr;
  if (session.finish) {
    auto finish = std::move(session.finish);
    session.finish = nullptr;
    finish();
  }
}

struct SessionGuard {
  TargetSession& session;
  ~SessionGuard() { end_session(session); }
};

// One attempt; returns true when SLAC failed and a retry makes sense.
bool run_attempt(TargetSession& session, const ScenarioSpec& spec, const RunConfig& cfg,
                 const std::string& station_id, int attempt, ScenarioOutcome& out,
                 CaptureLog& log) {
  auto slac_cfg = cfg.slac;
  slac_cfg.run_id = derive_run_id(station_id, spec.id, attempt);
  if (session.local_mac) slac_cfg.ev_mac = *session.local_mac;
  try {
    auto s = slac::run_slac_ev(*session.slac, slac_cfg, *session.control_pilot, log);
    out.slac_matched = s.state == slac::SlacState::Matched;
    if (!out.slac_matched) {
      out.slac_failed_stage = s.failed_stage ? slac::to_string(*s.failed_stage) : "unknown";
      out.failure = "slac";
      out.detail = s.failure_reason;
      return true;
    }
  } catch (const std::exception& e) {
    out.failure = "slac";
    out.detail = e.what();
    return true;
  }

  auto sdp = v2gtp::sdp_discover(*session.sdp, {spec.sdp_security, v2gtp::TransportProtocol::Tcp},
                                 cfg.sdp_retries, cfg.sdp_timeout, log);
  out.sdp.attempts = sdp.attempts;
  out.sdp.warnings = sdp.warnings;
  out.sdp.discovered = sdp.discovered();
  if (!sdp.discovered()) {
    out.failure = "sdp";
    out.detail = "no SDP response";
    return false;
  }
  out.sdp.security = sdp.response->security;
  out.sdp.downgraded = sdp.downgraded;
  out.sdp.endpoint = endpoint_to_string(sdp.response->endpoint());
  if (spec.sdp_security == v2gtp::Security::TlsRequired && sdp.downgraded) {
    out.failure = "sdp_downgrade";
    out.detail = "TLS requested, station offered plaintext";
    return false;
  }

  std::unique_ptr<ByteStream> stream;
  try {
    stream = session.connect(sdp.response->endpoint(), Clock::now() + cfg.tcp_timeout);
  } catch (const TransportError& e) {
    out.detail = e.what();
  }
  if (!stream) {
    out.failure = "tcp";
    if (out.detail.empty()) out.detail = "connect failed";
    return false;
  }
  log.event(Layer::tcp, "connected to " + *out.sdp.endpoint);

  if (sdp.response->security == v2gtp::Security::TlsRequired) {
    auto cs = tls::probe_tls(std::move(stream), cfg.trust, Clock::now() + cfg.tcp_timeout,
                             cfg.tls_policy, &log);
    out.tls = summarize(cs.result);
    if (!cs.result.handshake_ok) {
      out.failure = "tls";
      out.detail = cs.result.detail;
      return false;
    }
    stream = std::move(cs.stream);
  }

  const auto request = apphand::encode_handshake_request(spec.entries);
  try {
    v2gtp::write_message(*stream, v2gtp::kPayloadExi, request, &log,
                         "supportedAppProtocolReq, " + std::to_string(spec.entries.size()) +
                             " entries");
  } catch (const TransportError& e) {
    out.failure = "handshake";
    out.detail = e.what();
    return false;
  }
  auto msg = v2gtp::read_message(*stream, Clock::now() + cfg.message_timeout);
  if (!msg) {
    out.failure = "handshake";
    out.detail = msg.error().detail;
    stream->close();
    return false;
  }
  log.record(Direction::rx, Layer::v2gtp, v2gtp::encode_v2gtp(*msg), "supportedAppProtocolRes");
  auto res = msg->payload_type == v2gtp::kPayloadExi
                 ? apphand::decode_handshake_response(msg->payload)
                 : Expected<apphand::HandshakeResponse, apphand::ExiError>(
                       apphand::ExiError{0, "unexpected payload type"});
  // The session ends here: nothing beyond the negotiation is ever sent.
  stream->close();
  if (!res) {
    out.failure = "handshake";
    out.detail = res.error().detail;
    return false;
  }
  out.handshake = *res;
  out.chosen_protocol = apphand::chosen_protocol(*res, spec.entries);
  if (res->response_code != apphand::ResponseCode::FailedNoNegotiation && !out.chosen_protocol) {
    out.failure = "handshake";
    out.detail = "response names a schema that was not offered";
  }
  return false;
}

}  // namespace

ScenarioOutcome run_scenario(Target& target, const ScenarioSpec& spec, const RunConfig& cfg,
                             const TranscriptSink& sink) {
  const auto station = target.station();
  ScenarioOutcome out;
  int attempts = 0;
  for (int attempt = 0; attempt <= std::max(cfg.slac_retries, 0); ++attempt) {
    out = ScenarioOutcome{};
    out.scenario_id = spec.id;
    out.requested_security = spec.sdp_security;
    for (const auto& e : spec.entries) {
      if (auto p = apphand::protocol_for_namespace(e.namespace_uri)) out.advertised.push_back(*p);
    }
    ++attempts;
    CaptureLog log;
    bool retry = false;
    {
      TargetSession session = target.open(spec.id, log);
      SessionGuard guard{session};
      retry = run_attempt(session, spec, cfg, station.id, attempt, out, log);
    }
    if (sink) sink(spec.id, log);
    if (cfg.capture_dir) {
      auto stem = file_safe(station.id) + "-s" + std::to_string(spec.id);
      log.write_json_lines(*cfg.capture_dir / (stem + ".jsonl"));
      log.write_pcap(*cfg.capture_dir / (stem + ".pcap"));
      out.transcript_ref = stem + ".jsonl";
    }
    if (!retry) break;
  }
  out.slac_attempts = attempts;
  if (spec.id == 1 && !out.tls) {
    TlsSummary t;
    t.detail = "not attempted: " + out.failure.value_or("no TLS endpoint");
    out.tls = t;
  }
  return out;
}

StationReport run_station_test(Target& target, const RunConfig& cfg, const TranscriptSink& sink) {
  StationReport report;
  report.station = target.station();
  for (int id : cfg.order) {
    report.scenarios.push_back(run_scenario(target, scenario(id), cfg, sink));
    if (!report.scenarios.back().transcript_ref.empty()) {
      report.captures.push_back(report.scenarios.back().transcript_ref);
    }
  }
  std::sort(report.scenarios.begin(), report.scenarios.end(),
            [](const auto& a, const auto& b) { return a.scenario_id < b.scenario_id; });
  std::sort(report.captures.begin(), report.captures.end());
  report.derived = derive_flags(report.scenarios);
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json();
}

json protocol_json(const std::optional<Protocol>& p) {
  return p ? json(apphand::to_string(*p)) : json();
}

std::optional<Protocol> protocol_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return apphand::protocol_from_string(j.get<std::string>());
}

json to_json(const tls::CertificateSummary& c) {
  return {{"subject", c.subject},
          {"issuer", c.issuer},
          {"not_before", c.not_before},
          {"not_after", c.not_after},
          {"key_algorithm", c.key_algorithm}};
}

json to_json(const TlsSummary& t) {
  json chain = json::array();
  for (const auto& c : t.presented_chain) chain.push_back(to_json(c));
  return {{"handshake_ok", t.handshake_ok},
          {"tls_version", t.tls_version},
          {"cipher_suite", t.cipher_suite},
          {"presented_chain", chain},
          {"chain_valid", t.chain_valid},
          {"matched_root", opt(t.matched_root)},
          {"chain_problems", t.chain_problems},
          {"failure_stage", opt(t.failure_stage)},
          {"detail", t.detail}};
}

TlsSummary tls_from(const json& j) {
  TlsSummary t;
  t.handshake_ok = j.at("handshake_ok").get<bool>();
  t.tls_version = j.at("tls_version").get<std::string>();
  t.cipher_suite = j.at("cipher_suite").get<std::string>();
  for (const auto& c : j.at("presented_chain")) {
    t.presented_chain.push_back({c.at("subject").get<std::string>(), c.at("issuer").get<std::string>(),
                                 c.at("not_before").get<std::string>(),
                                 c.at("not_after").get<std::string>(),
                                 c.at("key_algorithm").get<std::string>()});
  }
  t.chain_valid = j.at("chain_valid").get<bool>();
  if (!j.at("matched_root").is_null()) t.matched_root = j["matched_root"].get<std::string>();
  t.chain_problems = j.at("chain_problems").get<std::vector<std::string>>();
  if (!j.at("failure_stage").is_null()) t.failure_stage = j["failure_stage"].get<std::string>();
  t.detail = j.at("detail").get<std::string>();
  return t;
}

v2gtp::Security security_from(const std::string& s) {
  if (s == "tls_required") return v2gtp::Security::TlsRequired;
  if (s == "no_tls") return v2gtp::Security::NoTls;
  throw std::invalid_argument("security: " + s);
}

apphand::ResponseCode response_code_from(const std::string& s) {
  for (auto c : {apphand::ResponseCode::OkSuccessfulNegotiation,
                 apphand::ResponseCode::OkSuccessfulNegotiationWithMinorDeviation,
                 apphand::ResponseCode::FailedNoNegotiation}) {
    if (apphand::to_string(c) == s) return c;
  }
  throw std::invalid_argument("response code: " + s);
}

json to_json(const ScenarioOutcome& o) {
  json advertised = json::array();
  for (auto p : o.advertised) advertised.push_back(apphand::to_string(p));
  json sdp = {{"discovered", o.sdp.discovered},
              {"security", o.sdp.security ? json(v2gtp::to_string(*o.sdp.security)) : json()},
              {"downgraded", o.sdp.downgraded},
              {"attempts", o.sdp.attempts},
              {"endpoint", opt(o.sdp.endpoint)},
              {"warnings", o.sdp.warnings}};
  json handshake;
  if (o.handshake) {
    handshake = {{"response_code", apphand::to_string(o.handshake->response_code)},
                 {"schema_id", opt(o.handshake->chosen_schema_id)}};
  }
  return {{"id", o.scenario_id},
          {"requested_security", v2gtp::to_string(o.requested_security)},
          {"advertised", advertised},
          {"slac", {{"attempts", o.slac_attempts},
                    {"matched", o.slac_matched},
                    {"failed_stage", opt(o.slac_failed_stage)}}},
          {"sdp", sdp},
          {"tls", o.tls ? to_json(*o.tls) : json()},
          {"handshake", handshake},
          {"chosen_protocol", protocol_json(o.chosen_protocol)},
          {"failure", opt(o.failure)},
          {"detail", o.detail},
          {"transcript", o.transcript_ref}};
}

ScenarioOutcome scenario_from(const json& j) {
  ScenarioOutcome o;
  o.scenario_id = j.at("id").get<int>();
  o.requested_security = security_from(j.at("requested_security").get<std::string>());
  for (const auto& p : j.at("advertised")) {
    o.advertised.push_back(apphand::protocol_from_string(p.get<std::string>()));
  }
  const auto& slac = j.at("slac");
  o.slac_attempts = slac.at("attempts").get<int>();
  o.slac_matched = slac.at("matched").get<bool>();
  if (!slac.at("failed_stage").is_null()) o.slac_failed_stage = slac["failed_stage"].get<std::string>();
  const auto& sdp = j.at("sdp");
  o.sdp.discovered = sdp.at("discovered").get<bool>();
  if (!sdp.at("security").is_null()) o.sdp.security = security_from(sdp["security"].get<std::string>());
  o.sdp.downgraded = sdp.at("downgraded").get<bool>();
  o.sdp.attempts = sdp.at("attempts").get<int>();
  if (!sdp.at("endpoint").is_null()) o.sdp.endpoint = sdp["endpoint"].get<std::string>();
  o.sdp.warnings = sdp.at("warnings").get<std::vector<std::string>>();
  if (!j.at("tls").is_null()) o.tls = tls_from(j["tls"]);
  if (!j.at("handshake").is_null()) {
    apphand::HandshakeResponse h;
    h.response_code = response_code_from(j["handshake"].at("response_code").get<std::string>());
    if (!j["handshake"].at("schema_id").is_null()) {
      h.chosen_schema_id = j["handshake"]["schema_id"].get<std::uint8_t>();
    }
    o.handshake = h;
  }
  o.chosen_protocol = protocol_from(j.at("chosen_protocol"));
  if (!j.at("failure").is_null()) o.failure = j["failure"].get<std::string>();
  o.detail = j.at("detail").get<std::string>();
  o.transcript_ref = j.at("transcript").get<std::string>();
  return o;
}

}  // namespace

nlohmann::json to_json(const StationReport& r) {
  auto j = artifact_header("station_report");
  j["station"] = {{"id", r.station.id},
                  {"cpo", r.station.cluster.cpo},
                  {"manufacturer", r.station.cluster.manufacturer},
                  {"model", r.station.model},
                  {"year", opt(r.station.install_year)},
                  {"year_label", r.station.year_label}};
  json scenarios = json::array();
  for (const auto& o : r.scenarios) scenarios.push_back(to_json(o));
  j["scenarios"] = scenarios;
  j["derived"] = {{"supports_tls", r.derived.supports_tls},
                  {"supports_iso2", r.derived.supports_iso2},
                  {"supports_din", r.derived.supports_din},
                  {"preferred_protocol", protocol_json(r.derived.preferred_protocol)},
                  {"chain_valid", opt(r.derived.chain_valid)}};
  j["captures"] = r.captures;
  return j;
}

StationReport station_report_from_json(const nlohmann::json& j) {
  check_artifact(j, "station_report");
  try {
    StationReport r;
    const auto& s = j.at("station");
    r.station.id = s.at("id").get<std::string>();
    r.station.cluster = {s.at("cpo").get<std::string>(), s.at("manufacturer").get<std::string>()};
    r.station.model = s.at("model").get<std::string>();
    if (!s.at("year").is_null()) r.station.install_year = s["year"].get<int>();
    r.station.year_label = s.at("year_label").get<std::string>();
    for (const auto& o : j.at("scenarios")) r.scenarios.push_back(scenario_from(o));
    const auto& d = j.at("derived");
    r.derived.supports_tls = d.at("supports_tls").get<bool>();
    r.derived.supports_iso2 = d.at("supports_iso2").get<bool>();
    r.derived.supports_din = d.at("supports_din").get<bool>();
    r.derived.preferred_protocol = protocol_from(d.at("preferred_protocol"));
    if (!d.at("chain_valid").is_null()) r.derived.chain_valid = d["chain_valid"].get<bool>();
    r.captures = j.at("captures").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("station report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(std::string("station report: ") + e.what());
  }
}

std::vector<StationReport> load_reports(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<StationReport> out;
  for (const auto& f : files) {
    try {
      out.push_back(station_report_from_json(read_json_file(f)));
    } catch (const ArtifactError& e) {
      throw ArtifactError(f.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace chargescope::orchestrator
