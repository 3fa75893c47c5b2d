#include "chargescope/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "chargescope/artifact.hpp"

namespace chargescope::market {

std::string to_string(const ClusterKey& k) { return k.cpo + "/" + k.manufacturer; }

std::vector<ClusterStats> clusters_from_counts(const std::map<ClusterKey, std::uint64_t>& counts) {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> per_cpo;
  for (const auto& [key, n] : counts) {
    if (key.cpo.empty() || key.manufacturer.empty()) {
      throw std::invalid_argument("cluster key with empty component: " + to_string(key));
    }
    total += n;
    per_cpo[key.cpo] += n;
  }
  std::vector<ClusterStats> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts) {
    ClusterStats s;
    s.key = key;
    s.point_count = n;
    s.cpo_point_count = per_cpo[key.cpo];
    s.total_points = total;
    s.share_of_total = total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
    s.share_within_cpo =
        s.cpo_point_count ? static_cast<double>(n) / static_cast<double>(s.cpo_point_count) : 0.0;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const ClusterStats& a, const ClusterStats& b) {
    return a.point_count > b.point_count;
  });
  return out;
}

std::vector<ClusterStats> build_clusters(const dataset::AnalysisSet& set) {
  std::map<ClusterKey, std::uint64_t> counts;
  for (const auto& r : set.records) counts[{r.cpo, r.manufacturer}] += r.charge_point_count;
  return clusters_from_counts(counts);
}

std::map<std::string, double> manufacturer_shares(const dataset::AnalysisSet& set) {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& r : set.records) {
    counts[r.manufacturer] += r.charge_point_count;
    total += r.charge_point_count;
  }
  std::map<std::string, double> out;
  for (const auto& [m, n] : counts) {
    out[m] = static_cast<double>(n) / static_cast<double>(total);
  }
  return out;
}

std::vector<std::string> pick_representatives(std::span<const dataset::StationRecord> candidates,
                                              std::uint32_t count) {
  std::map<int, std::vector<std::string>> by_year;
  std::vector<std::string> undated;
  for (const auto& s : candidates) {
    if (s.install_year) {
      by_year[*s.install_year].push_back(s.source_id);
    } else {
      undated.push_back(s.source_id);
    }
  }
  for (auto& [y, ids] : by_year) std::sort(ids.begin(), ids.end(), std::greater<>());
  std::sort(undated.begin(), undated.end());

  std::vector<std::string> out;
  std::vector<int> chosen_years;
  std::map<int, int> uses;
  while (out.size() < count) {
    // Year farthest from those already chosen; fewer prior picks, then the
    // earlier year break ties.
    std::optional<int> best;
    long best_dist = -1;
    for (const auto& [y, ids] : by_year) {
      if (ids.empty()) continue;
      long dist = std::numeric_limits<long>::max();
      for (int c : chosen_years) dist = std::min<long>(dist, std::labs(y - c));
      if (!best || dist > best_dist || (dist == best_dist && uses[y] < uses[*best])) {
        best = y;
        best_dist = dist;
      }
    }
    if (!best) break;
    auto& ids = by_year[*best];
    out.push_back(ids.back());
    ids.pop_back();
    chosen_years.push_back(*best);
    ++uses[*best];
  }
  for (std::size_t i = 0; i < undated.size() && out.size() < count; ++i) out.push_back(undated[i]);
  return out;
}

namespace {

std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", f * 100.0);
  return buf;
}

}  // namespace

SamplePlan plan_sample(std::span<const ClusterStats> clusters, std::uint32_t budget,
                       std::uint32_t stations_per_cluster,
                       std::span<const dataset::StationRecord> stations) {
  if (budget == 0) throw std::invalid_argument("budget must be at least 1");
  if (stations_per_cluster == 0) throw std::invalid_argument("stations_per_cluster must be at least 1");

  std::vector<const ClusterStats*> order;
  for (const auto& c : clusters) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const ClusterStats* a, const ClusterStats* b) {
    if (a->point_count != b->point_count) return a->point_count > b->point_count;
    return a->key < b->key;
  });

  std::map<ClusterKey, std::vector<dataset::StationRecord>> members;
  for (const auto& s : stations) members[{s.cpo, s.manufacturer}].push_back(s);

  SamplePlan plan;
  plan.budget = budget;
  plan.stations_per_cluster = stations_per_cluster;
  for (std::size_t i = 0; i < order.size() && i < budget; ++i) {
    const auto& c = *order[i];
    PlannedCluster p;
    p.key = c.key;
    p.point_count = c.point_count;
    p.share_of_total = c.share_of_total;
    if (auto it = members.find(c.key); it != members.end()) {
      p.stations = pick_representatives(it->second, stations_per_cluster);
    }
    p.rationale = "rank " + std::to_string(i + 1) + " by charge points (" +
                  std::to_string(c.point_count) + ", " + percent(c.share_of_total) + " of total)";
    plan.planned_coverage += c.share_of_total;
    plan.selected.push_back(std::move(p));
  }
  return plan;
}

void check_cluster_invariants(std::span<const ClusterStats> clusters) {
  if (clusters.empty()) return;
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> per_cpo;
  std::map<ClusterKey, int> seen;
  for (const auto& c : clusters) {
    if (c.key.cpo.empty() || c.key.manufacturer.empty()) {
      throw std::invalid_argument("cluster key with empty component");
    }
    if (++seen[c.key] > 1) throw std::invalid_argument("duplicate cluster " + to_string(c.key));
    total += c.point_count;
    per_cpo[c.key.cpo] += c.point_count;
  }
  double sum = 0;
  std::map<std::string, double> within;
  for (const auto& c : clusters) {
    auto name = to_string(c.key);
    if (c.total_points != total || c.cpo_point_count != per_cpo[c.key.cpo]) {
      throw std::invalid_argument(name + ": point totals inconsistent");
    }
    double expect = total ? static_cast<double>(c.point_count) / static_cast<double>(total) : 0.0;
    if (std::fabs(c.share_of_total - expect) > 1e-9) {
      throw std::invalid_argument(name + ": share_of_total does not match point_count");
    }
    sum += c.share_of_total;
    within[c.key.cpo] += c.share_within_cpo;
  }
  if (total && std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("share_of_total does not sum to 1");
  }
  for (const auto& [cpo, s] : within) {
    if (per_cpo[cpo] && std::fabs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("share_within_cpo for " + cpo + " does not sum to 1");
    }
  }
}

nlohmann::json to_json(std::span<const ClusterStats> clusters) {
  auto j = artifact_header("clusters");
  auto arr = nlohmann::json::array();
  for (const auto& c : clusters) {
    arr.push_back({{"cpo", c.key.cpo},
                   {"manufacturer", c.key.manufacturer},
                   {"point_count", c.point_count},
                   {"share_of_total", c.share_of_total},
                   {"share_within_cpo", c.share_within_cpo}});
  }
  j["clusters"] = std::move(arr);
  return j;
}

std::vector<ClusterStats> clusters_from_json(const nlohmann::json& j) {
  check_artifact(j, "clusters");
  std::map<ClusterKey, std::uint64_t> counts;
  try {
    for (const auto& c : j.at("clusters")) {
      ClusterKey key{c.at("cpo").get<std::string>(), c.at("manufacturer").get<std::string>()};
      if (counts.count(key)) throw ArtifactError("duplicate cluster " + to_string(key));
      counts[key] = c.at("point_count").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("clusters: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(std::string("clusters: ") + e.what());
  }
  // Shares are recomputed from counts; stored shares are informational.
  return clusters_from_counts(counts);
}

nlohmann::json to_json(const SamplePlan& plan) {
  auto j = artifact_header("sample_plan");
  j["budget"] = plan.budget;
  j["stations_per_cluster"] = plan.stations_per_cluster;
  j["planned_coverage"] = plan.planned_coverage;
  auto arr = nlohmann::json::array();
  for (const auto& p : plan.selected) {
    arr.push_back({{"cpo", p.key.cpo},
                   {"manufacturer", p.key.manufacturer},
                   {"point_count", p.point_count},
                   {"share_of_total", p.share_of_total},
                   {"stations", p.stations},
                   {"rationale", p.rationale}});
  }
  j["selected"] = std::move(arr);
  return j;
}

SamplePlan sample_plan_from_json(const nlohmann::json& j) {
  check_artifact(j, "sample_plan");
  try {
    SamplePlan plan;
    plan.budget = j.at("budget").get<std::uint32_t>();
    plan.stations_per_cluster = j.at("stations_per_cluster").get<std::uint32_t>();
    plan.planned_coverage = j.at("planned_coverage").get<double>();
    for (const auto& p : j.at("selected")) {
      plan.selected.push_back({{p.at("cpo").get<std::string>(), p.at("manufacturer").get<std::string>()},
                               p.at("point_count").get<std::uint64_t>(),
                               p.at("share_of_total").get<double>(),
                               p.at("stations").get<std::vector<std::string>>(),
                               p.at("rationale").get<std::string>()});
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("sample plan: ") + e.what());
  }
}

}  // namespace chargescope::market
