#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace chargescope::dataset {

enum class ConnectorStandard { ccs, other };

struct RawStationRecord {
  std::string source_id;
  std::string country;  // ISO 3166 alpha-2, upper case
  double latitude = 0;
  double longitude = 0;
  std::string cpo_label;
  std::optional<std::string> mo_label;
  std::optional<std::string> manufacturer_label;
  std::optional<std::string> model_label;
  std::uint32_t charge_point_count = 1;
  ConnectorStandard connector = ConnectorStandard::ccs;
  std::optional<int> install_year;
  std::optional<double> max_power_kw;

  bool operator==(const RawStationRecord&) const = default;
};

enum class RegistryFormat { csv, json_lines };

RegistryFormat registry_format_from_string(const std::string& s);

struct Reject {
  std::size_t line = 0;  // 1-based physical line in the input
  std::string reason;

  bool operator==(const Reject&) const = default;
};

struct ParseResult {
  std::vector<RawStationRecord> records;
  std::vector<Reject> rejects;
};

/// Header problems (csv) and unreadable input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kRegistryColumns[] = {
    "source_id", "country", "lat", "lon", "cpo", "mo", "manufacturer", "model",
    "charge_points", "connector", "install_year", "max_power_kw"};

struct ParseOptions {
  /// Upper bound for install_year is this + 1. Defaults to the current year.
  std::optional<int> current_year;
};

/// One record per well-formed row; every malformed row becomes a Reject.
/// Blank lines are not rows. Throws SchemaError for a bad csv header.
ParseResult parse_registry(std::istream& in, RegistryFormat format, const ParseOptions& opts = {});
/// Throws IoError when the file cannot be opened.
ParseResult parse_registry_file(const std::filesystem::path& path, RegistryFormat format,
                                const ParseOptions& opts = {});

std::vector<std::string> split_csv_line(std::string_view line);

/// Lowercase (ASCII), trim, collapse internal whitespace runs to one space.
std::string default_canonical(std::string_view label);

enum class AliasScope { cpo, manufacturer };

std::string to_string(AliasScope s);

/// Raw label -> canonical identifier. Lookups normalize the raw label with
/// default_canonical first; unmapped labels fall through to that default.
class AliasMap {
 public:
  explicit AliasMap(AliasScope scope) : scope_(scope) {}

  /// Throws std::invalid_argument for non-canonical targets or entries that
  /// would make normalization non-idempotent (a target remapped elsewhere).
  void add(std::string_view raw, std::string_view canonical);
  std::string canonicalize(std::string_view label) const;

  AliasScope scope() const { return scope_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Two-column csv raw_label,canonical; a header row is optional.
  static AliasMap load_csv(std::istream& in, AliasScope scope);
  static AliasMap load_csv_file(const std::filesystem::path& path, AliasScope scope);

 private:
  AliasScope scope_;
  std::map<std::string, std::string> entries_;
};

/// Applies the alias maps to cpo, mo and manufacturer labels and the default
/// normalization to model labels. Idempotent. Throws std::invalid_argument
/// when the maps have the wrong scopes.
std::vector<RawStationRecord> normalize_labels(const std::vector<RawStationRecord>& records,
                                               const AliasMap& cpo_aliases,
                                               const AliasMap& mfr_aliases);

struct StationRecord {
  std::string source_id;
  std::string country;
  double latitude = 0;
  double longitude = 0;
  std::string cpo;
  std::optional<std::string> mo;
  std::string manufacturer;
  std::optional<std::string> model;
  std::uint32_t charge_point_count = 1;
  std::optional<int> install_year;
  std::optional<double> max_power_kw;

  bool operator==(const StationRecord&) const = default;
};

struct AnalysisSet {
  std::string country;
  std::vector<StationRecord> records;
  // Drop counters count input records; the *_points twins count charge points.
  std::uint64_t total_input = 0;
  std::uint64_t dropped_non_ccs = 0;
  std::uint64_t dropped_wrong_country = 0;
  std::uint64_t dropped_no_manufacturer = 0;
  std::uint64_t total_input_points = 0;
  std::uint64_t dropped_non_ccs_points = 0;
  std::uint64_t dropped_wrong_country_points = 0;
  std::uint64_t dropped_no_manufacturer_points = 0;

  std::uint64_t retained_points() const;
  bool operator==(const AnalysisSet&) const = default;
};

struct BuildOptions {
  /// Optional re-attribution of ambiguous network labels (e.g. mobility
  /// operators listed as CPO) to another canonical CPO. Empty by default.
  std::map<std::string, std::string> cpo_reattribution;
};

/// Filters in order: non-CCS, other country, missing manufacturer. Output is
/// sorted by source_id (input order among equal ids).
AnalysisSet build_analysis_set(const std::vector<RawStationRecord>& records,
                               const std::string& country, const BuildOptions& opts = {});

nlohmann::json to_json(const AnalysisSet& set);
/// Throws FormatVersionError / ArtifactError.
AnalysisSet analysis_set_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<Reject>& rejects);

}  // namespace chargescope::dataset
