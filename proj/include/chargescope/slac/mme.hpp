#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "chargescope/bytes.hpp"
#include "chargescope/expected.hpp"
#include "chargescope/slac/constants.hpp"

namespace chargescope::slac {

inline constexpr MacAddress kBroadcastMac = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};

/// HomePlug management frame. For MMV >= 1 the two fragmentation bytes
/// (FMSN/FMID) follow the MMTYPE; they are carried in `fmi`.
///
/// Frames shorter than the Ethernet minimum are zero-padded on encode. On
/// decode the padding is stripped for MMTYPEs with a known fixed payload
/// size; frames of unknown MMTYPE keep everything after the header as
/// payload, so only unpadded unknown frames round-trip bit-exactly.
struct MmeFrame {
  MacAddress dst{};
  MacAddress src{};
  std::uint16_t ethertype = kEthertypeHomePlug;
  std::uint8_t mmv = kMmvGreenPhy;
  std::uint16_t mmtype = 0;
  std::uint16_t fmi = 0;
  Bytes payload;

  bool operator==(const MmeFrame&) const = default;
};

class FrameSizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

enum class MmeDecodeErrorKind { truncated_header, wrong_ethertype, truncated_payload };

struct MmeDecodeError {
  MmeDecodeErrorKind kind;
  std::string detail;
};

std::size_t mme_header_size(std::uint8_t mmv);

/// Throws FrameSizeError when the frame would exceed the Ethernet MTU.
Bytes encode_mme(const MmeFrame& frame);
/// Total: returns a frame or a structured error for any input.
Expected<MmeFrame, MmeDecodeError> decode_mme(ByteView bytes);

/// Short human-readable description, e.g. "CM_SLAC_PARM.REQ 02:00:..->ff:..".
std::string describe(const MmeFrame& frame);

}  // namespace chargescope::slac
