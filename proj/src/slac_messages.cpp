#include "chargescope/slac/messages.hpp"

#include <stdexcept>

namespace chargescope::slac {

void SlacParmReq::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_array(out, run_id);
}

SlacParmReq SlacParmReq::read(ByteReader& r) {
  SlacParmReq m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.run_id = r.array<8>();
  return m;
}

void SlacParmCnf::write(Bytes& out) const {
  put_array(out, msound_target);
  put_u8(out, num_sounds);
  put_u8(out, time_out);
  put_u8(out, resp_type);
  put_array(out, forwarding_sta);
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_array(out, run_id);
}

SlacParmCnf SlacParmCnf::read(ByteReader& r) {
  SlacParmCnf m;
  m.msound_target = r.array<6>();
  m.num_sounds = r.u8();
  m.time_out = r.u8();
  m.resp_type = r.u8();
  m.forwarding_sta = r.array<6>();
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.run_id = r.array<8>();
  return m;
}

void StartAttenCharInd::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_u8(out, num_sounds);
  put_u8(out, time_out);
  put_u8(out, resp_type);
  put_array(out, forwarding_sta);
  put_array(out, run_id);
}

StartAttenCharInd StartAttenCharInd::read(ByteReader& r) {
  StartAttenCharInd m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.num_sounds = r.u8();
  m.time_out = r.u8();
  m.resp_type = r.u8();
  m.forwarding_sta = r.array<6>();
  m.run_id = r.array<8>();
  return m;
}

void MnbcSoundInd::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_array(out, sender_id);
  put_u8(out, remaining);
  put_array(out, run_id);
  put_array(out, reserved);
  put_array(out, random);
}

MnbcSoundInd MnbcSoundInd::read(ByteReader& r) {
  MnbcSoundInd m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.sender_id = r.array<17>();
  m.remaining = r.u8();
  m.run_id = r.array<8>();
  m.reserved = r.array<8>();
  m.random = r.array<16>();
  return m;
}

void AttenCharInd::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_array(out, source_address);
  put_array(out, run_id);
  put_array(out, source_id);
  put_array(out, resp_id);
  put_u8(out, num_sounds);
  put_u8(out, num_groups);
  put_array(out, groups);
}

AttenCharInd AttenCharInd::read(ByteReader& r) {
  AttenCharInd m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.source_address = r.array<6>();
  m.run_id = r.array<8>();
  m.source_id = r.array<17>();
  m.resp_id = r.array<17>();
  m.num_sounds = r.u8();
  m.num_groups = r.u8();
  m.groups = r.array<kAttenGroups>();
  return m;
}

void AttenCharRsp::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_array(out, source_address);
  put_array(out, run_id);
  put_array(out, source_id);
  put_array(out, resp_id);
  put_u8(out, result);
}

AttenCharRsp AttenCharRsp::read(ByteReader& r) {
  AttenCharRsp m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.source_address = r.array<6>();
  m.run_id = r.array<8>();
  m.source_id = r.array<17>();
  m.resp_id = r.array<17>();
  m.result = r.u8();
  return m;
}

void SlacMatchReq::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_le16(out, mvf_length);
  put_array(out, pev_id);
  put_array(out, pev_mac);
  put_array(out, evse_id);
  put_array(out, evse_mac);
  put_array(out, run_id);
  put_array(out, reserved);
}

SlacMatchReq SlacMatchReq::read(ByteReader& r) {
  SlacMatchReq m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.mvf_length = r.le16();
  m.pev_id = r.array<17>();
  m.pev_mac = r.array<6>();
  m.evse_id = r.array<17>();
  m.evse_mac = r.array<6>();
  m.run_id = r.array<8>();
  m.reserved = r.array<8>();
  return m;
}

void SlacMatchCnf::write(Bytes& out) const {
  put_u8(out, application_type);
  put_u8(out, security_type);
  put_le16(out, mvf_length);
  put_array(out, pev_id);
  put_array(out, pev_mac);
  put_array(out, evse_id);
  put_array(out, evse_mac);
  put_array(out, run_id);
  put_array(out, reserved);
  put_array(out, nid);
  put_u8(out, reserved2);
  put_array(out, nmk);
}

SlacMatchCnf SlacMatchCnf::read(ByteReader& r) {
  SlacMatchCnf m;
  m.application_type = r.u8();
  m.security_type = r.u8();
  m.mvf_length = r.le16();
  m.pev_id = r.array<17>();
  m.pev_mac = r.array<6>();
  m.evse_id = r.array<17>();
  m.evse_mac = r.array<6>();
  m.run_id = r.array<8>();
  m.reserved = r.array<8>();
  m.nid = r.array<7>();
  m.reserved2 = r.u8();
  m.nmk = r.array<16>();
  return m;
}

void SetKeyReq::write(Bytes& out) const {
  put_u8(out, key_type);
  put_le32(out, my_nonce);
  put_le32(out, your_nonce);
  put_u8(out, pid);
  put_le16(out, prn);
  put_u8(out, pmn);
  put_u8(out, cco_capability);
  put_array(out, nid);
  put_u8(out, new_eks);
  put_array(out, new_key);
}

SetKeyReq SetKeyReq::read(ByteReader& r) {
  SetKeyReq m;
  m.key_type = r.u8();
  m.my_nonce = r.le32();
  m.your_nonce = r.le32();
  m.pid = r.u8();
  m.prn = r.le16();
  m.pmn = r.u8();
  m.cco_capability = r.u8();
  m.nid = r.array<7>();
  m.new_eks = r.u8();
  m.new_key = r.array<16>();
  return m;
}

std::uint16_t mmtype_of(const SlacMessage& msg) {
  return std::visit([](const auto& m) { return std::decay_t<decltype(m)>::kMmType; }, msg);
}

MmeFrame make_frame(const MacAddress& dst, const MacAddress& src, const SlacMessage& msg) {
  MmeFrame f;
  f.dst = dst;
  f.src = src;
  f.mmtype = mmtype_of(msg);
  std::visit([&](const auto& m) { m.write(f.payload); }, msg);
  return f;
}

namespace {

template <typename T, typename... Rest>
std::optional<SlacMessage> parse_as(std::uint16_t mmtype, ByteReader& r) {
  if (mmtype == T::kMmType) return SlacMessage{T::read(r)};
  if constexpr (sizeof...(Rest) > 0) {
    return parse_as<Rest...>(mmtype, r);
  } else {
    return std::nullopt;
  }
}

template <typename... Ts>
std::optional<SlacMessage> parse_variant(std::uint16_t mmtype, ByteReader& r,
                                         std::variant<Ts...>*) {
  return parse_as<Ts...>(mmtype, r);
}

}  // namespace

std::optional<SlacMessage> parse_message(const MmeFrame& frame) {
  ByteReader r(frame.payload);
  try {
    return parse_variant(frame.mmtype, r, static_cast<SlacMessage*>(nullptr));
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

}  // namespace chargescope::slac
