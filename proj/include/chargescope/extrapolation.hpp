#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chargescope/market.hpp"
#include "chargescope/orchestrator.hpp"

namespace chargescope::extrapolation {

enum class ConflictPolicy { block, majority };

std::string to_string(ConflictPolicy p);
ConflictPolicy conflict_policy_from_string(const std::string& s);

struct Verdict {
  bool supports_tls = false;
  bool supports_iso2 = false;
  bool supports_din = false;

  bool operator==(const Verdict&) const = default;
};

struct TestedStation {
  std::string id;
  std::string model;
  std::string year_label;
  Verdict flags;

  bool operator==(const TestedStation&) const = default;
};

struct ClusterResult {
  market::ClusterStats stats;  // copied unchanged from the market module
  std::vector<TestedStation> tested;
  std::optional<Verdict> verdict;
  std::size_t evidence_count = 0;
  /// Same-cluster reports disagree; with the block policy there is no verdict.
  bool conflict = false;
  std::vector<orchestrator::WitnessPair> conflict_witnesses;

  bool operator==(const ClusterResult&) const = default;
};

class UnknownClusterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One result per cluster, in the clusters' order. Throws
/// UnknownClusterError when a report names a cluster not in `clusters`.
std::vector<ClusterResult> extrapolate(const std::vector<market::ClusterStats>& clusters,
                                       const std::vector<orchestrator::StationReport>& reports,
                                       ConflictPolicy policy = ConflictPolicy::block);

/// num / den, kept exact.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
  /// Percentage rounded half-up to one decimal, computed in integers.
  std::string percent() const;
  bool operator==(const Fraction&) const = default;
};

struct DiscrepancyNote {
  std::string kind;    // data_discrepancy, within_rounding, source_conflict
  std::string metric;
  std::string computed;
  std::string printed;
  std::string detail;

  bool operator==(const DiscrepancyNote&) const = default;
};

struct NationalSummary {
  std::uint64_t total_points = 0;
  std::uint64_t covered_points = 0;
  std::uint64_t covered_cpo_points = 0;  // all points of CPOs with a covered cluster
  std::uint64_t tls_points = 0;
  std::uint64_t iso2_points = 0;
  std::uint64_t din_points = 0;
  std::vector<ClusterResult> per_cluster_table;
  std::vector<DiscrepancyNote> notes;

  Fraction covered_share() const { return {covered_points, total_points}; }
  Fraction tls_share_of_all() const { return {tls_points, total_points}; }
  Fraction tls_share_of_covered() const { return {tls_points, covered_points}; }
  Fraction iso2_share_of_all() const { return {iso2_points, total_points}; }
  Fraction iso2_share_of_covered() const { return {iso2_points, covered_points}; }
  Fraction covered_cpo_share() const { return {covered_cpo_points, total_points}; }

  bool operator==(const NationalSummary&) const = default;
};

/// Throws std::invalid_argument when the results come from different
/// analysis sets (differing total_points).
NationalSummary aggregate(const std::vector<ClusterResult>& results);

/// Compares against printed values ({summary:{...}, cross_table:[...]}) and
/// returns one note per metric.
std::vector<DiscrepancyNote> compare_with_reference(const NationalSummary& summary,
                                                    const nlohmann::json& reference);

enum class Format { json, csv, markdown };

Format format_from_string(const std::string& s);
std::string render_report(const NationalSummary& summary, Format format);

nlohmann::json to_json(const NationalSummary& summary);
NationalSummary summary_from_json(const nlohmann::json& j);

}  // namespace chargescope::extrapolation
