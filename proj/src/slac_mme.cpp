#include "chargescope/slac/mme.hpp"

#include <algorithm>
#include <cstdio>

namespace chargescope::slac {

std::size_t mme_header_size(std::uint8_t mmv) { return mmv == 0 ? 3 : 5; }

Bytes encode_mme(const MmeFrame& frame) {
  const std::size_t mme_len = mme_header_size(frame.mmv) + frame.payload.size();
  if (mme_len > kEthernetMtu) {
    throw FrameSizeError("MME payload of " + std::to_string(frame.payload.size()) +
                         " bytes exceeds the Ethernet MTU");
  }
  Bytes out;
  out.reserve(std::max(kMinFrameSize, kEthernetHeaderSize + mme_len));
  put_array(out, frame.dst);
  put_array(out, frame.src);
  put_be16(out, frame.ethertype);
  put_u8(out, frame.mmv);
  put_le16(out, frame.mmtype);
  if (frame.mmv != 0) put_le16(out, frame.fmi);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  if (out.size() < kMinFrameSize) out.resize(kMinFrameSize, 0);
  return out;
}

Expected<MmeFrame, MmeDecodeError> decode_mme(ByteView bytes) {
  ByteReader r(bytes);
  MmeFrame f;
  if (bytes.size() < kEthernetHeaderSize + 1) {
    return MmeDecodeError{MmeDecodeErrorKind::truncated_header,
                          "frame of " + std::to_string(bytes.size()) + " bytes"};
  }
  f.dst = r.array<6>();
  f.src = r.array<6>();
  f.ethertype = r.be16();
  if (f.ethertype != kEthertypeHomePlug) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04x", f.ethertype);
    return MmeDecodeError{MmeDecodeErrorKind::wrong_ethertype, std::string("ethertype 0x") + buf};
  }
  f.mmv = r.u8();
  if (r.remaining() < mme_header_size(f.mmv) - 1) {
    return MmeDecodeError{MmeDecodeErrorKind::truncated_header, "MME header cut short"};
  }
  f.mmtype = r.le16();
  if (f.mmv != 0) f.fmi = r.le16();
  if (auto info = lookup_mmtype(f.mmtype)) {
    if (r.remaining() < info->payload_size) {
      return MmeDecodeError{MmeDecodeErrorKind::truncated_payload,
                            std::string(info->name) + " needs " +
                                std::to_string(info->payload_size) + " payload bytes, got " +
                                std::to_string(r.remaining())};
    }
    f.payload = r.take(info->payload_size);
  } else {
    f.payload = r.rest();
  }
  return f;
}

std::string describe(const MmeFrame& frame) {
  std::string name;
  if (auto info = lookup_mmtype(frame.mmtype)) {
    name = std::string(info->name);
  } else {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "MMTYPE 0x%04x", frame.mmtype);
    name = buf;
  }
  return name + " " + mac_to_string(frame.src) + " -> " + mac_to_string(frame.dst);
}

}  // namespace chargescope::slac
