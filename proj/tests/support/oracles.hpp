#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <vector>

#include "chargescope/market.hpp"
#include "chargescope/orchestrator.hpp"

namespace testsupport {

/// Flag counts obtained by expanding every cluster into single points.
struct Tally {
  std::uint64_t total = 0, covered = 0, tls = 0, iso2 = 0, din = 0;
};

/// A cluster counts when it has reports and all of them agree on
/// (tls, iso2, din, preferred); every point then inherits the flags.
inline Tally per_point_tally(const std::vector<chargescope::market::ClusterStats>& cs,
                             const std::vector<chargescope::orchestrator::StationReport>& reports) {
  using chargescope::orchestrator::StationReport;
  std::map<chargescope::market::ClusterKey, std::vector<const StationReport*>> by;
  for (const auto& r : reports) by[r.station.cluster].push_back(&r);
  Tally t;
  for (const auto& c : cs) {
    auto it = by.find(c.key);
    bool verdict = it != by.end();
    const chargescope::orchestrator::DerivedFlags* first = verdict ? &it->second[0]->derived : nullptr;
    if (verdict) {
      for (auto* r : it->second) {
        const auto& d = r->derived;
        if (d.supports_tls != first->supports_tls || d.supports_iso2 != first->supports_iso2 ||
            d.supports_din != first->supports_din || d.preferred_protocol != first->preferred_protocol)
          verdict = false;
      }
    }
    for (std::uint64_t i = 0; i < c.point_count; ++i) {
      ++t.total;
      if (!verdict) continue;
      ++t.covered;
      if (first->supports_tls) ++t.tls;
      if (first->supports_iso2) ++t.iso2;
      if (first->supports_din) ++t.din;
    }
  }
  return t;
}

/// Largest point sum over all subsets of size min(budget, n).
inline std::uint64_t best_subset(const std::vector<std::uint64_t>& pts, std::size_t budget) {
  std::uint64_t best = 0;
  std::size_t n = pts.size();
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != std::min(budget, n)) continue;
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1U << i)) sum += pts[i];
    }
    best = std::max(best, sum);
  }
  return best;
}

}  // namespace testsupport
