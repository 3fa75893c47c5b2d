#include "chargescope/artifact.hpp"

#include <fstream>

namespace chargescope {

nlohmann::json artifact_header(const std::string& kind) {
  return {{"format_version", kFormatVersion}, {"kind", kind}};
}

void check_artifact(const nlohmann::json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw FormatVersionError("artifact has no format_version (expected " + kind + ")");
  }
  int v = j["format_version"].get<int>();
  if (v != kFormatVersion) {
    throw FormatVersionError("format_version " + std::to_string(v) + " not supported (expected " +
                             std::to_string(kFormatVersion) + ")");
  }
  if (j.value("kind", std::string{}) != kind) {
    throw FormatVersionError("artifact kind '" + j.value("kind", std::string{}) +
                             "', expected '" + kind + "'");
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

std::string dump_stable(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dump_stable(j);
}

}  // namespace chargescope
