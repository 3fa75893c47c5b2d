#include "chargescope/slac/session.hpp"

#include <algorithm>
#include <cstdio>

namespace chargescope::slac {

std::string to_string(CpState s) {
  switch (s) {
    case CpState::A: return "A";
    case CpState::B: return "B";
    case CpState::C: return "C";
  }
  return "?";
}

void ControlPilot::apply(const BasicSignalingEvent& ev) {
  if (ev.cp_state == CpState::C) {
    throw ControlPilotError("control pilot state C requested; the probe never enables power");
  }
  std::lock_guard lock(mu_);
  state_ = ev.cp_state;
  history_.push_back(ev);
  if (log_) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "cp_state=%s duty=%.1f%%", to_string(ev.cp_state).c_str(),
                  ev.duty_cycle_pct);
    log_->event(Layer::control_pilot, buf);
  }
}

CpState ControlPilot::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<BasicSignalingEvent> ControlPilot::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

std::string to_string(SlacState s) {
  switch (s) {
    case SlacState::Idle: return "Idle";
    case SlacState::ParmSent: return "ParmSent";
    case SlacState::Sounding: return "Sounding";
    case SlacState::AttenReceived: return "AttenReceived";
    case SlacState::MatchSent: return "MatchSent";
    case SlacState::Matched: return "Matched";
    case SlacState::Failed: return "Failed";
  }
  return "?";
}

bool is_allowed_transition(SlacState from, SlacState to) {
  if (from == SlacState::Matched || from == SlacState::Failed) return false;
  if (to == SlacState::Failed) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

void SlacSession::transition(SlacState to) {
  if (!is_allowed_transition(state, to)) {
    throw std::logic_error("illegal SLAC transition " + to_string(state) + " -> " + to_string(to));
  }
  state = to;
  history.push_back(to);
}

namespace {

void send_frame(MessageChannel& link, CaptureLog& log, const MmeFrame& frame) {
  Bytes wire = encode_mme(frame);
  log.record(Direction::tx, Layer::slac, wire, describe(frame));
  link.send(wire);
}

// Receives frames until one parses as message type T and satisfies `accept`.
// Everything received is logged exactly once, matched or not.
template <typename T, typename Pred>
std::optional<std::pair<MmeFrame, T>> await(MessageChannel& link, CaptureLog& log,
                                            Clock::time_point deadline, Pred accept) {
  while (Clock::now() < deadline) {
    auto wire = link.receive(deadline);
    if (!wire) return std::nullopt;
    auto frame = decode_mme(*wire);
    if (!frame) {
      log.record(Direction::rx, Layer::slac, *wire, "undecodable: " + frame.error().detail);
      continue;
    }
    auto msg = parse_message(*frame);
    const T* typed = msg ? std::get_if<T>(&*msg) : nullptr;
    bool ok = typed && accept(*typed);
    log.record(Direction::rx, Layer::slac, *wire,
               describe(*frame) + (typed && !ok ? " (ignored)" : ""));
    if (ok) return std::make_pair(*frame, *typed);
  }
  return std::nullopt;
}

void fail(SlacSession& s, std::string reason) {
  s.failed_stage = s.state;
  s.failure_reason = std::move(reason);
  s.transition(SlacState::Failed);
}

StationId station_id_from_mac(const MacAddress& mac) {
  StationId id{};
  std::copy(mac.begin(), mac.end(), id.begin());
  return id;
}

}  // namespace

SlacSession run_slac_ev(MessageChannel& link, const SlacConfig& config, const ControlPilot& cp,
                        CaptureLog& log) {
  if (cp.state() != CpState::B) {
    throw std::invalid_argument("SLAC requires control pilot state B");
  }
  SlacSession s;
  s.run_id = config.run_id;
  s.ev_mac = config.ev_mac;
  auto same_run = [&](const auto& m) { return m.run_id == s.run_id; };

  SlacParmReq parm;
  parm.run_id = s.run_id;
  send_frame(link, log, make_frame(kBroadcastMac, s.ev_mac, parm));
  s.transition(SlacState::ParmSent);

  auto cnf = await<SlacParmCnf>(link, log, Clock::now() + config.stage_timeout, same_run);
  if (!cnf) {
    fail(s, "no CM_SLAC_PARM.CNF before timeout");
    return s;
  }
  s.evse_mac = cnf->first.src;

  auto sounds = static_cast<std::uint8_t>(std::clamp(config.num_sounds, 1, 255));
  StartAttenCharInd start;
  start.num_sounds = sounds;
  start.time_out = static_cast<std::uint8_t>(
      std::clamp<long long>(config.stage_timeout.count() / 100, 1, 255));
  start.forwarding_sta = s.ev_mac;
  start.run_id = s.run_id;
  send_frame(link, log, make_frame(kBroadcastMac, s.ev_mac, start));
  for (int i = sounds - 1; i >= 0; --i) {
    MnbcSoundInd sound;
    sound.sender_id = station_id_from_mac(s.ev_mac);
    sound.remaining = static_cast<std::uint8_t>(i);
    sound.run_id = s.run_id;
    send_frame(link, log, make_frame(kBroadcastMac, s.ev_mac, sound));
  }
  s.transition(SlacState::Sounding);

  auto atten = await<AttenCharInd>(link, log, Clock::now() + config.stage_timeout, same_run);
  if (!atten) {
    fail(s, "no CM_ATTEN_CHAR.IND before timeout");
    return s;
  }
  const auto& ind = atten->second;
  std::size_t groups = std::min<std::size_t>(ind.num_groups, kAttenGroups);
  s.attenuation_profile.assign(ind.groups.begin(),
                               ind.groups.begin() + static_cast<std::ptrdiff_t>(groups));
  s.transition(SlacState::AttenReceived);

  AttenCharRsp rsp;
  rsp.source_address = s.ev_mac;
  rsp.run_id = s.run_id;
  rsp.source_id = ind.source_id;
  rsp.resp_id = ind.resp_id;
  send_frame(link, log, make_frame(s.evse_mac, s.ev_mac, rsp));

  SlacMatchReq match;
  match.pev_id = station_id_from_mac(s.ev_mac);
  match.pev_mac = s.ev_mac;
  match.evse_id = station_id_from_mac(s.evse_mac);
  match.evse_mac = s.evse_mac;
  match.run_id = s.run_id;
  send_frame(link, log, make_frame(s.evse_mac, s.ev_mac, match));
  s.transition(SlacState::MatchSent);

  auto matched = await<SlacMatchCnf>(link, log, Clock::now() + config.stage_timeout, same_run);
  if (!matched) {
    fail(s, "no CM_SLAC_MATCH.CNF before timeout");
    return s;
  }
  s.nid = matched->second.nid;
  s.nmk = matched->second.nmk;
  s.transition(SlacState::Matched);
  return s;
}

std::string to_string(SlacFault f) {
  switch (f) {
    case SlacFault::none: return "none";
    case SlacFault::no_parm_cnf: return "no_parm_cnf";
    case SlacFault::wrong_run_id: return "wrong_run_id";
  }
  return "?";
}

SlacFault slac_fault_from_string(const std::string& s) {
  if (s.empty() || s == "none") return SlacFault::none;
  if (s == "no_parm_cnf") return SlacFault::no_parm_cnf;
  if (s == "wrong_run_id") return SlacFault::wrong_run_id;
  throw std::invalid_argument("unknown slac_fault: " + s);
}

EvseSlacResult run_slac_evse(MessageChannel& link, const EvseSlacConfig& config,
                             CaptureLog& log) {
  EvseSlacResult result;
  auto any = [](const auto&) { return true; };
  auto deadline = [&] { return Clock::now() + config.wait_timeout; };

  auto req = await<SlacParmReq>(link, log, deadline(), any);
  if (!req) {
    result.detail = "no CM_SLAC_PARM.REQ";
    return result;
  }
  result.ev_mac = req->first.src;
  result.run_id = req->second.run_id;
  if (config.fault == SlacFault::no_parm_cnf) {
    result.detail = "fault injected: CM_SLAC_PARM.CNF withheld";
    return result;
  }
  auto same_run = [&](const auto& m) { return m.run_id == result.run_id; };

  SlacParmCnf cnf;
  cnf.num_sounds = static_cast<std::uint8_t>(config.num_sounds);
  cnf.time_out = 6;
  cnf.forwarding_sta = result.ev_mac;
  cnf.run_id = result.run_id;
  if (config.fault == SlacFault::wrong_run_id) {
    for (auto& b : cnf.run_id) b = static_cast<std::uint8_t>(b ^ 0xA5);
  }
  send_frame(link, log, make_frame(result.ev_mac, config.evse_mac, cnf));
  if (config.fault == SlacFault::wrong_run_id) {
    // Drain whatever the EV still sends so the transcript is complete.
    await<SlacMatchReq>(link, log, deadline(), [](const auto&) { return false; });
    result.detail = "fault injected: CM_SLAC_PARM.CNF with foreign run_id";
    return result;
  }

  auto start = await<StartAttenCharInd>(link, log, deadline(), same_run);
  if (!start) {
    result.detail = "no CM_START_ATTEN_CHAR.IND";
    return result;
  }
  const int expected = start->second.num_sounds;
  // Sounds are counted until the last one (remaining == 0) arrives or the
  // sounding window closes; lost sounds simply lower the count.
  auto window = Clock::now() + config.wait_timeout;
  while (result.sounds_received < expected) {
    auto sound = await<MnbcSoundInd>(link, log, window, same_run);
    if (!sound) break;
    ++result.sounds_received;
    if (sound->second.remaining == 0) break;
  }

  AttenCharInd ind;
  ind.source_address = result.ev_mac;
  ind.run_id = result.run_id;
  ind.num_sounds = static_cast<std::uint8_t>(result.sounds_received);
  ind.groups.fill(config.attenuation_db);
  send_frame(link, log, make_frame(result.ev_mac, config.evse_mac, ind));

  auto rsp = await<AttenCharRsp>(link, log, deadline(), same_run);
  if (!rsp) {
    result.detail = "no CM_ATTEN_CHAR.RSP";
    return result;
  }
  auto match = await<SlacMatchReq>(link, log, deadline(), same_run);
  if (!match) {
    result.detail = "no CM_SLAC_MATCH.REQ";
    return result;
  }
  SlacMatchCnf mc;
  mc.pev_id = match->second.pev_id;
  mc.pev_mac = match->second.pev_mac;
  mc.evse_id = match->second.evse_id;
  mc.evse_mac = config.evse_mac;
  mc.run_id = result.run_id;
  mc.nid = config.nid;
  mc.nmk = config.nmk;
  send_frame(link, log, make_frame(result.ev_mac, config.evse_mac, mc));
  result.matched = true;
  return result;
}

}  // namespace chargescope::slac
