#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "chargescope/orchestrator.hpp"

namespace chargescope::orchestrator {

std::string to_string(Dimension d) {
  return d == Dimension::A1_manufacturer_capability ? "A1_manufacturer_capability"
                                                    : "A2_cpo_configuration";
}

namespace {

// Majority value of `values` (first seen wins ties) and, for every other
// value, its position. Witness pairs join each deviant with the first
// member holding the majority value.
template <typename V>
std::vector<std::pair<std::size_t, std::size_t>> deviants(const std::vector<V>& values) {
  std::vector<std::pair<V, std::size_t>> counts;
  for (const auto& v : values) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == v; });
    if (it == counts.end()) {
      counts.emplace_back(v, 1);
    } else {
      ++it->second;
    }
  }
  auto majority = counts.front().first;
  std::size_t best = counts.front().second;
  for (const auto& [v, n] : counts) {
    if (n > best) {
      majority = v;
      best = n;
    }
  }
  std::size_t anchor = 0;
  while (!(values[anchor] == majority)) ++anchor;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] == majority)) out.emplace_back(anchor, i);
  }
  return out;
}

using A2Flags = std::tuple<bool, bool, bool, std::optional<apphand::Protocol>>;

A2Flags a2_flags(const StationReport& r) {
  return {r.derived.supports_tls, r.derived.supports_iso2, r.derived.supports_din,
          r.derived.preferred_protocol};
}

std::vector<std::string> a2_differences(const A2Flags& a, const A2Flags& b) {
  std::vector<std::string> d;
  if (std::get<0>(a) != std::get<0>(b)) d.push_back("supports_tls");
  if (std::get<1>(a) != std::get<1>(b)) d.push_back("supports_iso2");
  if (std::get<2>(a) != std::get<2>(b)) d.push_back("supports_din");
  if (std::get<3>(a) != std::get<3>(b)) d.push_back("preferred_protocol");
  return d;
}

using Capability = std::set<apphand::Protocol>;

}  // namespace

std::vector<ConsistencyFinding> validate_assumptions(const std::vector<StationReport>& reports) {
  std::map<market::ClusterKey, std::vector<const StationReport*>> clusters;
  for (const auto& r : reports) clusters[r.station.cluster].push_back(&r);
  for (auto& [k, list] : clusters) {
    std::stable_sort(list.begin(), list.end(),
                     [](auto* a, auto* b) { return a->station.id < b->station.id; });
  }

  std::vector<ConsistencyFinding> out;
  for (const auto& [key, list] : clusters) {
    ConsistencyFinding f;
    f.cluster = key;
    f.dimension = Dimension::A2_cpo_configuration;
    f.reports = list.size();
    if (list.size() < 2) {
      f.insufficient_sample = true;
      out.push_back(f);
      continue;
    }
    std::vector<A2Flags> flags;
    for (auto* r : list) flags.push_back(a2_flags(*r));
    for (auto [a, b] : deviants(flags)) {
      f.witnesses.push_back(
          {list[a]->station.id, list[b]->station.id, a2_differences(flags[a], flags[b])});
    }
    f.consistent = f.witnesses.empty();
    out.push_back(f);
  }

  // A1: capability per cluster is the union over its stations.
  std::map<std::string, std::vector<std::pair<market::ClusterKey, Capability>>> by_mfr;
  for (const auto& [key, list] : clusters) {
    Capability cap;
    for (auto* r : list) {
      if (r->derived.supports_iso2) cap.insert(apphand::Protocol::iso15118_2);
      if (r->derived.supports_din) cap.insert(apphand::Protocol::din70121);
    }
    by_mfr[key.manufacturer].emplace_back(key, cap);
  }
  for (const auto& [mfr, entries] : by_mfr) {
    ConsistencyFinding f;
    f.cluster = {"*", mfr};
    f.dimension = Dimension::A1_manufacturer_capability;
    for (const auto& [key, cap] : entries) f.reports += clusters[key].size();
    if (entries.size() < 2) {
      f.insufficient_sample = true;
      out.push_back(f);
      continue;
    }
    std::vector<Capability> caps;
    for (const auto& e : entries) caps.push_back(e.second);
    for (auto [a, b] : deviants(caps)) {
      std::vector<std::string> diff;
      for (auto p : {apphand::Protocol::iso15118_2, apphand::Protocol::din70121}) {
        if (caps[a].count(p) != caps[b].count(p)) diff.push_back(apphand::to_string(p));
      }
      f.witnesses.push_back({clusters[entries[a].first].front()->station.id,
                             clusters[entries[b].first].front()->station.id, diff});
    }
    f.consistent = f.witnesses.empty();
    out.push_back(f);
  }
  return out;
}

nlohmann::json to_json(const std::vector<ConsistencyFinding>& findings) {
  auto arr = nlohmann::json::array();
  for (const auto& f : findings) {
    auto w = nlohmann::json::array();
    for (const auto& p : f.witnesses) {
      w.push_back({{"first", p.first}, {"second", p.second}, {"differing", p.differing}});
    }
    arr.push_back({{"cpo", f.cluster.cpo},
                   {"manufacturer", f.cluster.manufacturer},
                   {"dimension", to_string(f.dimension)},
                   {"consistent", f.consistent},
                   {"insufficient_sample", f.insufficient_sample},
                   {"reports", f.reports},
                   {"witnesses", w}});
  }
  return arr;
}

std::vector<TranscriptViolation> scan_transcript(const std::vector<CaptureEntry>& entries) {
  std::vector<TranscriptViolation> out;
  int requests = 0;
  int responses = 0;
  for (const auto& e : entries) {
    if (e.layer == Layer::control_pilot && e.summary.find("cp_state=C") != std::string::npos) {
      out.push_back({e.seq, "control pilot reached state C"});
    }
    if (e.summary.rfind("ignored:", 0) == 0) {
      out.push_back({e.seq, "message after negotiation: " + e.summary});
    }
    if (e.layer != Layer::v2gtp) continue;
    auto msg = v2gtp::decode_v2gtp(e.data);
    if (!msg) {
      out.push_back({e.seq, "undecodable V2GTP message"});
      continue;
    }
    if (msg->payload_type != v2gtp::kPayloadExi) {
      out.push_back({e.seq, "V2GTP payload type outside the handshake"});
      continue;
    }
    if (apphand::decode_handshake_request(msg->payload)) {
      if (++requests > 1 || responses > 0) out.push_back({e.seq, "second handshake request"});
    } else if (apphand::decode_handshake_response(msg->payload)) {
      if (++responses > 1 || requests == 0) out.push_back({e.seq, "unexpected handshake response"});
    } else {
      out.push_back({e.seq, "EXI message beyond supportedAppProtocol"});
    }
  }
  return out;
}

}  // namespace chargescope::orchestrator
