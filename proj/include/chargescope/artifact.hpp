#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace chargescope {

/// Version stamped into every JSON artifact the pipeline writes.
inline constexpr int kFormatVersion = 1;

class FormatVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed artifact content (missing field, wrong type).
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json artifact_header(const std::string& kind);

/// Throws FormatVersionError when kind or format_version do not match.
void check_artifact(const nlohmann::json& j, const std::string& kind);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with sorted keys and a trailing newline, so identical
/// content always gives identical bytes.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
std::string dump_stable(const nlohmann::json& j);

}  // namespace chargescope
