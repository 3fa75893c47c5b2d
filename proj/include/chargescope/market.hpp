#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chargescope/dataset.hpp"

namespace chargescope::market {

struct ClusterKey {
  std::string cpo;
  std::string manufacturer;

  auto operator<=>(const ClusterKey&) const = default;
  bool operator==(const ClusterKey&) const = default;
};

std::string to_string(const ClusterKey& k);  // "cpo/manufacturer"

/// Shares are derived from the integer counts, which are kept so that
/// downstream aggregation can stay exact.
struct ClusterStats {
  ClusterKey key;
  std::uint64_t point_count = 0;
  std::uint64_t cpo_point_count = 0;
  std::uint64_t total_points = 0;
  double share_of_total = 0;
  double share_within_cpo = 0;

  bool operator==(const ClusterStats&) const = default;
};

/// Sorted by point_count descending, then key.
std::vector<ClusterStats> build_clusters(const dataset::AnalysisSet& set);
/// Same, from explicit per-cluster point counts.
std::vector<ClusterStats> clusters_from_counts(const std::map<ClusterKey, std::uint64_t>& counts);

std::map<std::string, double> manufacturer_shares(const dataset::AnalysisSet& set);

struct PlannedCluster {
  ClusterKey key;
  std::uint64_t point_count = 0;
  double share_of_total = 0;
  std::vector<std::string> stations;  // representative source_ids
  std::string rationale;

  bool operator==(const PlannedCluster&) const = default;
};

struct SamplePlan {
  std::vector<PlannedCluster> selected;
  std::uint32_t budget = 1;
  std::uint32_t stations_per_cluster = 2;
  double planned_coverage = 0;

  bool operator==(const SamplePlan&) const = default;
};

/// Greedy: the `budget` largest clusters (ties by key). When `stations` is
/// given, up to stations_per_cluster representatives are picked per cluster,
/// spread across install years, then by source_id. Throws
/// std::invalid_argument for budget or stations_per_cluster of 0.
SamplePlan plan_sample(std::span<const ClusterStats> clusters, std::uint32_t budget,
                       std::uint32_t stations_per_cluster = 2,
                       std::span<const dataset::StationRecord> stations = {});

/// Representative choice on its own; `candidates` all belong to one cluster.
std::vector<std::string> pick_representatives(std::span<const dataset::StationRecord> candidates,
                                              std::uint32_t count);

/// Throws std::invalid_argument when share invariants do not hold.
void check_cluster_invariants(std::span<const ClusterStats> clusters);

nlohmann::json to_json(std::span<const ClusterStats> clusters);
/// Validates format_version, counts and share invariants.
std::vector<ClusterStats> clusters_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SamplePlan& plan);
SamplePlan sample_plan_from_json(const nlohmann::json& j);

}  // namespace chargescope::market
