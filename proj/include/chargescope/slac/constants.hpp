#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace chargescope::slac {

// HomePlug AV / Green PHY management message constants, as used by the
// ISO 15118-3 SLAC procedure. Sources: HomePlug Green PHY Specification
// 1.1 (MME formats, MMTYPE assignments) and ISO 15118-3:2015 Annex A
// (CM_SLAC_* payload layouts). MMTYPE low two bits select the variant:
// 0 = REQ, 1 = CNF, 2 = IND, 3 = RSP.

inline constexpr std::uint16_t kEthertypeHomePlug = 0x88E1;
inline constexpr std::uint8_t kMmvGreenPhy = 0x01;

inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kMinFrameSize = 60;
inline constexpr std::size_t kEthernetMtu = 1500;

inline constexpr std::uint16_t kCmSetKeyReq = 0x6008;
inline constexpr std::uint16_t kCmSetKeyCnf = 0x6009;
inline constexpr std::uint16_t kCmSlacParmReq = 0x6064;
inline constexpr std::uint16_t kCmSlacParmCnf = 0x6065;
inline constexpr std::uint16_t kCmStartAttenCharInd = 0x606A;
inline constexpr std::uint16_t kCmAttenCharInd = 0x606E;
inline constexpr std::uint16_t kCmAttenCharRsp = 0x606F;
inline constexpr std::uint16_t kCmMnbcSoundInd = 0x6076;
inline constexpr std::uint16_t kCmSlacMatchReq = 0x607C;
inline constexpr std::uint16_t kCmSlacMatchCnf = 0x607D;

// Payload sizes (bytes after the 5-byte MME header of MMV 1 frames).
inline constexpr std::size_t kSetKeyReqSize = 38;
inline constexpr std::size_t kSlacParmReqSize = 10;
inline constexpr std::size_t kSlacParmCnfSize = 25;
inline constexpr std::size_t kStartAttenCharIndSize = 19;
inline constexpr std::size_t kMnbcSoundIndSize = 52;
inline constexpr std::size_t kAttenCharIndSize = 110;
inline constexpr std::size_t kAttenCharRspSize = 51;
inline constexpr std::size_t kSlacMatchReqSize = 66;
inline constexpr std::size_t kSlacMatchCnfSize = 90;

inline constexpr std::size_t kAttenGroups = 58;
inline constexpr std::uint16_t kMatchReqMvfLength = 0x3E;
inline constexpr std::uint16_t kMatchCnfMvfLength = 0x56;
inline constexpr std::uint8_t kApplicationTypePevEvse = 0x00;
inline constexpr std::uint8_t kSecurityTypeNone = 0x00;
inline constexpr std::uint8_t kRespTypeOtherGp = 0x01;

struct MmTypeInfo {
  std::uint16_t mmtype;
  std::string_view name;
  std::size_t payload_size;
};

inline constexpr MmTypeInfo kMmTypes[] = {
    {kCmSetKeyReq, "CM_SET_KEY.REQ", kSetKeyReqSize},
    {kCmSlacParmReq, "CM_SLAC_PARM.REQ", kSlacParmReqSize},
    {kCmSlacParmCnf, "CM_SLAC_PARM.CNF", kSlacParmCnfSize},
    {kCmStartAttenCharInd, "CM_START_ATTEN_CHAR.IND", kStartAttenCharIndSize},
    {kCmMnbcSoundInd, "CM_MNBC_SOUND.IND", kMnbcSoundIndSize},
    {kCmAttenCharInd, "CM_ATTEN_CHAR.IND", kAttenCharIndSize},
    {kCmAttenCharRsp, "CM_ATTEN_CHAR.RSP", kAttenCharRspSize},
    {kCmSlacMatchReq, "CM_SLAC_MATCH.REQ", kSlacMatchReqSize},
    {kCmSlacMatchCnf, "CM_SLAC_MATCH.CNF", kSlacMatchCnfSize},
};

constexpr std::optional<MmTypeInfo> lookup_mmtype(std::uint16_t mmtype) {
  for (const auto& info : kMmTypes) {
    if (info.mmtype == mmtype) return info;
  }
  return std::nullopt;
}

}  // namespace chargescope::slac
