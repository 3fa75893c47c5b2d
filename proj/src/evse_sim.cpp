#include "chargescope/evse_sim.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "chargescope/artifact.hpp"
#include "chargescope/tls.hpp"

namespace chargescope::evse {

std::string to_string(SdpPolicy p) {
  switch (p) {
    case SdpPolicy::answer_tls: return "answer_tls";
    case SdpPolicy::answer_plaintext_downgrade: return "answer_plaintext_downgrade";
    case SdpPolicy::silent: return "silent";
  }
  return "?";
}

SdpPolicy sdp_policy_from_string(const std::string& s) {
  for (auto p : {SdpPolicy::answer_tls, SdpPolicy::answer_plaintext_downgrade, SdpPolicy::silent}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown sdp_policy: " + s);
}

bool EvseProfile::supports(apphand::Protocol p) const {
  return std::find(supported_protocols.begin(), supported_protocols.end(), p) !=
         supported_protocols.end();
}

void validate_profile(const EvseProfile& p) {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw ProfileError("profile '" + p.name + "': " + field + ": " + why);
  };
  if (p.name.empty()) fail("name", "empty");
  if (p.cpo.empty()) fail("cpo", "empty");
  if (p.manufacturer.empty()) fail("manufacturer", "empty");
  if (p.supported_protocols.empty()) fail("protocols", "empty");
  std::set<apphand::Protocol> uniq(p.supported_protocols.begin(), p.supported_protocols.end());
  if (uniq.size() != p.supported_protocols.size()) fail("protocols", "duplicate entry");
  if (!p.supports(p.preferred_protocol)) fail("preferred", "not among protocols");
  if (p.tls_enabled && !p.certificate_chain) fail("chain_path", "required when tls is true");
  if (p.sdp_policy == SdpPolicy::answer_tls && !p.tls_enabled) {
    fail("sdp_policy", "answer_tls requires tls");
  }
  if (p.certificate_chain) {
    try {
      tls::ServerCredentials::from_pem(*p.certificate_chain);
    } catch (const std::exception& e) {
      fail("chain_path", e.what());
    }
  }
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EvseProfile profile_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  EvseProfile p;
  p.name = j.value("name", std::string{});
  auto field = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const ProfileError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProfileError("profile '" + p.name + "': " + name + ": " + e.what());
    }
  };
  field("cpo", [&] { p.cpo = j.at("cpo").get<std::string>(); });
  field("manufacturer", [&] { p.manufacturer = j.at("manufacturer").get<std::string>(); });
  field("model", [&] { p.model = j.value("model", std::string{}); });
  field("year", [&] {
    if (j.contains("year") && !j["year"].is_null()) p.install_year = j["year"].get<int>();
  });
  p.year_label = j.value("year_label", p.install_year ? std::to_string(*p.install_year) : "?");
  field("protocols", [&] {
    for (const auto& s : j.at("protocols")) {
      p.supported_protocols.push_back(apphand::protocol_from_string(s.get<std::string>()));
    }
  });
  field("preferred", [&] {
    p.preferred_protocol = apphand::protocol_from_string(j.at("preferred").get<std::string>());
  });
  field("tls", [&] { p.tls_enabled = j.at("tls").get<bool>(); });
  field("sdp_policy",
        [&] { p.sdp_policy = sdp_policy_from_string(j.at("sdp_policy").get<std::string>()); });
  field("slac_fault", [&] {
    p.slac_fault = slac::slac_fault_from_string(j.value("slac_fault", std::string("none")));
  });
  field("chain_path", [&] {
    if (j.contains("chain_path") && !j["chain_path"].is_null()) {
      p.chain_path = j["chain_path"].get<std::string>();
      std::filesystem::path path(*p.chain_path);
      p.certificate_chain = read_text(path.is_absolute() ? path : base_dir / path);
    }
  });
  validate_profile(p);
  return p;
}

}  // namespace

std::vector<EvseProfile> profiles_from_json(const nlohmann::json& j,
                                            const std::filesystem::path& base_dir) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    check_artifact(j, "evse_profiles");
    if (!j.contains("profiles")) throw ArtifactError("evse_profiles: missing profiles");
    list = &j["profiles"];
  }
  if (!list->is_array()) throw ArtifactError("evse_profiles: expected a list");
  std::vector<EvseProfile> out;
  std::set<std::string> names;
  for (const auto& item : *list) {
    out.push_back(profile_from_json(item, base_dir));
    if (!names.insert(out.back().name).second) {
      throw ProfileError("profile '" + out.back().name + "': name: duplicate");
    }
  }
  return out;
}

std::vector<EvseProfile> load_profile_fixtures(const std::filesystem::path& file) {
  return profiles_from_json(read_json_file(file), file.parent_path());
}

nlohmann::json to_json(const EvseProfile& p) {
  nlohmann::json protocols = nlohmann::json::array();
  for (auto proto : p.supported_protocols) protocols.push_back(apphand::to_string(proto));
  return {{"name", p.name},
          {"cpo", p.cpo},
          {"manufacturer", p.manufacturer},
          {"model", p.model},
          {"year", p.install_year ? nlohmann::json(*p.install_year) : nlohmann::json()},
          {"year_label", p.year_label},
          {"protocols", protocols},
          {"preferred", apphand::to_string(p.preferred_protocol)},
          {"tls", p.tls_enabled},
          {"sdp_policy", to_string(p.sdp_policy)},
          {"chain_path", p.chain_path ? nlohmann::json(*p.chain_path) : nlohmann::json()},
          {"slac_fault", slac::to_string(p.slac_fault)}};
}

namespace {

std::optional<v2gtp::SdpResponse> answer_sdp(const EvseProfile& profile, EvseLinks& links,
                                             EvseSessionLog& out, CaptureLog& log,
                                             Clock::time_point deadline) {
  while (Clock::now() < deadline) {
    auto datagram = links.sdp->receive(deadline);
    if (!datagram) break;
    auto req = v2gtp::decode_sdp_request(*datagram);
    if (!req) {
      log.record(Direction::rx, Layer::sdp, *datagram, "malformed SDP request: " + req.error().detail);
      continue;
    }
    log.record(Direction::rx, Layer::sdp, *datagram,
               "SDP request security=" + v2gtp::to_string(req->security));
    out.sdp_requests.push_back(*req);

    auto security = v2gtp::Security::NoTls;
    if (req->security == v2gtp::Security::TlsRequired) {
      if (profile.sdp_policy == SdpPolicy::silent) {
        log.event(Layer::sdp, "TLS requested, not answering");
        continue;
      }
      if (profile.sdp_policy == SdpPolicy::answer_tls) security = v2gtp::Security::TlsRequired;
    }
    v2gtp::SdpResponse res;
    res.endpoint_ip = links.advertised.address;
    res.endpoint_port = links.advertised.port;
    res.security = security;
    auto wire = v2gtp::encode_sdp_response(res);
    log.record(Direction::tx, Layer::sdp, wire,
               "SDP response " + endpoint_to_string(links.advertised) +
                   " security=" + v2gtp::to_string(security));
    links.sdp->send(wire);
    return res;
  }
  return std::nullopt;
}

void log_rx(CaptureLog& log, const v2gtp::V2gtpMessage& msg, const std::string& summary) {
  log.record(Direction::rx, Layer::v2gtp, v2gtp::encode_v2gtp(msg), summary);
}

}  // namespace

EvseSessionLog run_evse(const EvseProfile& profile, EvseLinks& links, CaptureLog& log,
                        const EvseOptions& options) {
  validate_profile(profile);
  EvseSessionLog out;

  auto slac_cfg = options.slac;
  slac_cfg.fault = profile.slac_fault;
  out.slac = slac::run_slac_evse(*links.slac, slac_cfg, log);
  if (!out.slac.matched) {
    out.notes.push_back("SLAC not matched: " + out.slac.detail);
    return out;
  }

  out.sdp_answer = answer_sdp(profile, links, out, log, Clock::now() + options.sdp_wait);
  if (!out.sdp_answer) {
    out.notes.push_back("no SDP request answered");
    return out;
  }

  auto stream = links.accept ? links.accept(Clock::now() + options.connect_wait) : nullptr;
  if (!stream) {
    out.notes.push_back("no TCP connection");
    return out;
  }
  log.event(Layer::tcp, "connection accepted");
  if (out.sdp_answer->security == v2gtp::Security::TlsRequired) {
    try {
      auto creds = tls::ServerCredentials::from_pem(*profile.certificate_chain);
      stream = tls::accept_tls(std::move(stream), creds, Clock::now() + options.message_wait, &log);
      out.tls_served = true;
    } catch (const tls::TlsError& e) {
      out.notes.push_back(std::string("TLS handshake failed: ") + e.what());
      return out;
    }
  }

  auto msg = v2gtp::read_message(*stream, Clock::now() + options.message_wait);
  if (!msg) {
    out.notes.push_back("no handshake request: " + msg.error().detail);
    stream->close();
    return out;
  }
  if (msg->payload_type != v2gtp::kPayloadExi) {
    log_rx(log, *msg, "unexpected V2GTP payload type");
    out.notes.push_back("unexpected payload type");
    stream->close();
    return out;
  }
  auto entries = apphand::decode_handshake_request(msg->payload);
  if (!entries) {
    log_rx(log, *msg, "undecodable supportedAppProtocolReq");
    out.notes.push_back("bad handshake request: " + entries.error().detail);
    stream->close();
    return out;
  }
  log_rx(log, *msg, "supportedAppProtocolReq, " + std::to_string(entries->size()) + " entries");
  out.handshake_request = *entries;

  std::vector<apphand::SupportedProtocol> supported;
  for (auto p : profile.supported_protocols) supported.push_back(apphand::supported(p));
  auto res = apphand::select_with_preference(supported, apphand::supported(profile.preferred_protocol),
                                             *entries);
  out.handshake_response = res;
  auto payload = apphand::encode_handshake_response(res);
  v2gtp::write_message(*stream, v2gtp::kPayloadExi, payload, &log,
                       "supportedAppProtocolRes " + apphand::to_string(res.response_code));

  // Negotiation is the last step served; anything further is logged only.
  while (true) {
    auto extra = v2gtp::read_message(*stream, Clock::now() + options.message_wait);
    if (!extra) break;
    ++out.ignored_after_negotiation;
    log_rx(log, *extra, "ignored: session ends after negotiation");
  }
  stream->close();
  return out;
}

}  // namespace chargescope::evse
