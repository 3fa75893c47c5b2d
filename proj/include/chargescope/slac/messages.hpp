#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>

#include "chargescope/bytes.hpp"
#include "chargescope/slac/constants.hpp"
#include "chargescope/slac/mme.hpp"

namespace chargescope::slac {

using RunId = std::array<std::uint8_t, 8>;
using Nid = std::array<std::uint8_t, 7>;
using Nmk = std::array<std::uint8_t, 16>;
using StationId = std::array<std::uint8_t, 17>;
using AttenuationProfile = std::array<std::uint8_t, kAttenGroups>;

// Multi-byte integer fields are little-endian, as everywhere in HomePlug MMEs.

struct SlacParmReq {
  static constexpr std::uint16_t kMmType = kCmSlacParmReq;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  RunId run_id{};

  bool operator==(const SlacParmReq&) const = default;
  void write(Bytes& out) const;
  static SlacParmReq read(ByteReader& r);
};

struct SlacParmCnf {
  static constexpr std::uint16_t kMmType = kCmSlacParmCnf;
  MacAddress msound_target = kBroadcastMac;
  std::uint8_t num_sounds = 0;
  std::uint8_t time_out = 0;  // units of 100 ms
  std::uint8_t resp_type = kRespTypeOtherGp;
  MacAddress forwarding_sta{};
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  RunId run_id{};

  bool operator==(const SlacParmCnf&) const = default;
  void write(Bytes& out) const;
  static SlacParmCnf read(ByteReader& r);
};

struct StartAttenCharInd {
  static constexpr std::uint16_t kMmType = kCmStartAttenCharInd;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  std::uint8_t num_sounds = 0;
  std::uint8_t time_out = 0;
  std::uint8_t resp_type = kRespTypeOtherGp;
  MacAddress forwarding_sta{};
  RunId run_id{};

  bool operator==(const StartAttenCharInd&) const = default;
  void write(Bytes& out) const;
  static StartAttenCharInd read(ByteReader& r);
};

struct MnbcSoundInd {
  static constexpr std::uint16_t kMmType = kCmMnbcSoundInd;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  StationId sender_id{};
  std::uint8_t remaining = 0;
  RunId run_id{};
  std::array<std::uint8_t, 8> reserved{};
  std::array<std::uint8_t, 16> random{};

  bool operator==(const MnbcSoundInd&) const = default;
  void write(Bytes& out) const;
  static MnbcSoundInd read(ByteReader& r);
};

struct AttenCharInd {
  static constexpr std::uint16_t kMmType = kCmAttenCharInd;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  MacAddress source_address{};
  RunId run_id{};
  StationId source_id{};
  StationId resp_id{};
  std::uint8_t num_sounds = 0;
  std::uint8_t num_groups = kAttenGroups;
  AttenuationProfile groups{};

  bool operator==(const AttenCharInd&) const = default;
  void write(Bytes& out) const;
  static AttenCharInd read(ByteReader& r);
};

struct AttenCharRsp {
  static constexpr std::uint16_t kMmType = kCmAttenCharRsp;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  MacAddress source_address{};
  RunId run_id{};
  StationId source_id{};
  StationId resp_id{};
  std::uint8_t result = 0;

  bool operator==(const AttenCharRsp&) const = default;
  void write(Bytes& out) const;
  static AttenCharRsp read(ByteReader& r);
};

struct SlacMatchReq {
  static constexpr std::uint16_t kMmType = kCmSlacMatchReq;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  std::uint16_t mvf_length = kMatchReqMvfLength;
  StationId pev_id{};
  MacAddress pev_mac{};
  StationId evse_id{};
  MacAddress evse_mac{};
  RunId run_id{};
  std::array<std::uint8_t, 8> reserved{};

  bool operator==(const SlacMatchReq&) const = default;
  void write(Bytes& out) const;
  static SlacMatchReq read(ByteReader& r);
};

struct SlacMatchCnf {
  static constexpr std::uint16_t kMmType = kCmSlacMatchCnf;
  std::uint8_t application_type = kApplicationTypePevEvse;
  std::uint8_t security_type = kSecurityTypeNone;
  std::uint16_t mvf_length = kMatchCnfMvfLength;
  StationId pev_id{};
  MacAddress pev_mac{};
  StationId evse_id{};
  MacAddress evse_mac{};
  RunId run_id{};
  std::array<std::uint8_t, 8> reserved{};
  Nid nid{};
  std::uint8_t reserved2 = 0;
  Nmk nmk{};

  bool operator==(const SlacMatchCnf&) const = default;
  void write(Bytes& out) const;
  static SlacMatchCnf read(ByteReader& r);
};

struct SetKeyReq {
  static constexpr std::uint16_t kMmType = kCmSetKeyReq;
  std::uint8_t key_type = 0x01;  // NMK
  std::uint32_t my_nonce = 0;
  std::uint32_t your_nonce = 0;
  std::uint8_t pid = 0x04;  // HLE protocol
  std::uint16_t prn = 0;
  std::uint8_t pmn = 0;
  std::uint8_t cco_capability = 0;
  Nid nid{};
  std::uint8_t new_eks = 0x01;
  Nmk new_key{};

  bool operator==(const SetKeyReq&) const = default;
  void write(Bytes& out) const;
  static SetKeyReq read(ByteReader& r);
};

using SlacMessage = std::variant<SlacParmReq, SlacParmCnf, StartAttenCharInd, MnbcSoundInd,
                                 AttenCharInd, AttenCharRsp, SlacMatchReq, SlacMatchCnf,
                                 SetKeyReq>;

std::uint16_t mmtype_of(const SlacMessage& msg);
MmeFrame make_frame(const MacAddress& dst, const MacAddress& src, const SlacMessage& msg);
/// nullopt for unknown MMTYPEs or payloads shorter than the message layout.
std::optional<SlacMessage> parse_message(const MmeFrame& frame);

}  // namespace chargescope::slac
