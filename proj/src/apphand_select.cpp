#include <algorithm>
#include <vector>

#include "chargescope/apphand.hpp"

namespace chargescope::apphand {

const ProtocolInfo& info(Protocol p) {
  for (const auto& i : kProtocols) {
    if (i.protocol == p) return i;
  }
  throw std::invalid_argument("unknown protocol");
}

std::string to_string(Protocol p) { return std::string(info(p).name); }

Protocol protocol_from_string(const std::string& name) {
  for (const auto& i : kProtocols) {
    if (i.name == name) return i.protocol;
  }
  throw std::invalid_argument("unknown protocol name: " + name);
}

std::optional<Protocol> protocol_for_namespace(std::string_view ns) {
  for (const auto& i : kProtocols) {
    if (i.namespace_uri == ns) return i.protocol;
  }
  if (ns == kIso15118_20AcNamespace) return Protocol::iso15118_20;
  return std::nullopt;
}

AppProtocolEntry make_entry(Protocol p, std::uint8_t schema_id, std::uint8_t priority) {
  const auto& i = info(p);
  return {std::string(i.namespace_uri), i.version_major, i.version_minor, schema_id, priority};
}

std::string to_string(ResponseCode c) {
  switch (c) {
    case ResponseCode::OkSuccessfulNegotiation: return "OK_SuccessfulNegotiation";
    case ResponseCode::OkSuccessfulNegotiationWithMinorDeviation:
      return "OK_SuccessfulNegotiationWithMinorDeviation";
    case ResponseCode::FailedNoNegotiation: return "Failed_NoNegotiation";
  }
  return "?";
}

SupportedProtocol supported(Protocol p) {
  const auto& i = info(p);
  return {std::string(i.namespace_uri), i.version_major, i.version_minor};
}

namespace {

std::optional<HandshakeResponse> match(const SupportedProtocol& s, const AppProtocolEntry& e) {
  if (s.namespace_uri != e.namespace_uri || s.version_major != e.version_major) {
    return std::nullopt;
  }
  return HandshakeResponse{s.version_minor == e.version_minor
                               ? ResponseCode::OkSuccessfulNegotiation
                               : ResponseCode::OkSuccessfulNegotiationWithMinorDeviation,
                           e.schema_id};
}

std::vector<const AppProtocolEntry*> by_priority(std::span<const AppProtocolEntry> entries) {
  std::vector<const AppProtocolEntry*> order;
  for (const auto& e : entries) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->priority < b->priority; });
  return order;
}

}  // namespace

HandshakeResponse select_protocol(std::span<const SupportedProtocol> evse_supported,
                                  std::span<const AppProtocolEntry> ev_entries) {
  for (const auto* e : by_priority(ev_entries)) {
    for (const auto& s : evse_supported) {
      if (auto r = match(s, *e)) return *r;
    }
  }
  return {};
}

HandshakeResponse select_with_preference(std::span<const SupportedProtocol> evse_supported,
                                         const std::optional<SupportedProtocol>& preferred,
                                         std::span<const AppProtocolEntry> ev_entries) {
  if (preferred) {
    for (const auto* e : by_priority(ev_entries)) {
      if (auto r = match(*preferred, *e)) return *r;
    }
  }
  return select_protocol(evse_supported, ev_entries);
}

std::optional<Protocol> chosen_protocol(const HandshakeResponse& res,
                                        std::span<const AppProtocolEntry> ev_entries) {
  if (!res.chosen_schema_id) return std::nullopt;
  for (const auto& e : ev_entries) {
    if (e.schema_id == *res.chosen_schema_id) return protocol_for_namespace(e.namespace_uri);
  }
  return std::nullopt;
}

}  // namespace chargescope::apphand
