#include "chargescope/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "chargescope/artifact.hpp"

namespace chargescope::dataset {

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3
                                   : (c & 0xF8) == 0xF0 ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    if (len == 2 && c < 0xC2) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += len;
  }
  return true;
}

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

int this_year() {
  auto now = std::chrono::system_clock::now();
  return static_cast<int>(
      std::chrono::year_month_day(std::chrono::floor<std::chrono::days>(now)).year());
}

// Row-level failure; becomes a Reject.
struct RowError {
  std::string reason;
};

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw RowError{field + ": not a number: '" + text + "'"};
  }
  return v;
}

std::optional<std::string> opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

using Fields = std::map<std::string, std::string>;

RawStationRecord make_record(const Fields& f, int current_year) {
  auto get = [&](const char* k) {
    auto it = f.find(k);
    return it == f.end() ? std::string{} : trim(it->second);
  };
  RawStationRecord r;
  r.source_id = get("source_id");
  if (r.source_id.empty()) throw RowError{"source_id: missing"};

  r.country = get("country");
  for (auto& c : r.country) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  if (r.country.size() != 2 || !std::isupper(static_cast<unsigned char>(r.country[0])) ||
      !std::isupper(static_cast<unsigned char>(r.country[1]))) {
    throw RowError{"country: expected ISO 3166 alpha-2 code, got '" + get("country") + "'"};
  }

  r.latitude = parse_number<double>("lat", get("lat"));
  r.longitude = parse_number<double>("lon", get("lon"));
  if (!std::isfinite(r.latitude) || r.latitude < -90 || r.latitude > 90) {
    throw RowError{"lat: outside [-90, 90]"};
  }
  if (!std::isfinite(r.longitude) || r.longitude < -180 || r.longitude > 180) {
    throw RowError{"lon: outside [-180, 180]"};
  }

  r.cpo_label = get("cpo");
  if (r.cpo_label.empty()) throw RowError{"cpo: missing"};
  r.mo_label = opt(get("mo"));
  r.manufacturer_label = opt(get("manufacturer"));
  r.model_label = opt(get("model"));

  auto count = parse_number<long long>("charge_points", get("charge_points"));
  if (count < 1) throw RowError{"charge_points: must be >= 1, got " + std::to_string(count)};
  if (count > 100000) throw RowError{"charge_points: implausibly large"};
  r.charge_point_count = static_cast<std::uint32_t>(count);

  std::string connector = lower_ascii(get("connector"));
  if (connector.empty()) throw RowError{"connector: missing"};
  r.connector = connector == "ccs" ? ConnectorStandard::ccs : ConnectorStandard::other;

  if (auto y = get("install_year"); !y.empty()) {
    int year = parse_number<int>("install_year", y);
    if (year < 1990 || year > current_year + 1) {
      throw RowError{"install_year: " + y + " outside [1990, " + std::to_string(current_year + 1) +
                     "]"};
    }
    r.install_year = year;
  }
  if (auto p = get("max_power_kw"); !p.empty()) {
    double kw = parse_number<double>("max_power_kw", p);
    if (!std::isfinite(kw) || kw < 0) throw RowError{"max_power_kw: must be non-negative"};
    r.max_power_kw = kw;
  }
  return r;
}

Fields fields_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw RowError{std::string("invalid JSON: ") + e.what()};
  }
  if (!j.is_object()) throw RowError{"line is not a JSON object"};
  Fields f;
  for (const auto& [k, v] : j.items()) {
    if (v.is_null()) {
      f[k] = "";
    } else if (v.is_string()) {
      f[k] = v.get<std::string>();
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      f[k] = v.dump();
    } else if (v.is_number_float()) {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v.get<double>());
      f[k] = std::string(buf, p);
    } else {
      throw RowError{k + ": unsupported JSON type"};
    }
  }
  return f;
}

}  // namespace

RegistryFormat registry_format_from_string(const std::string& s) {
  if (s == "csv") return RegistryFormat::csv;
  if (s == "json-lines" || s == "jsonl") return RegistryFormat::json_lines;
  throw std::invalid_argument("unknown registry format: " + s);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

ParseResult parse_registry(std::istream& in, RegistryFormat format, const ParseOptions& opts) {
  if (!in) throw IoError("registry stream is not readable");
  const int year = opts.current_year.value_or(this_year());
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;

  if (format == RegistryFormat::csv) {
    while (header.empty() && std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      try {
        for (auto& h : split_csv_line(line)) header.push_back(trim(h));
      } catch (const std::invalid_argument&) {
        throw SchemaError("csv header is malformed");
      }
    }
    if (header.empty()) throw SchemaError("csv header row is missing");
    for (const char* col : kRegistryColumns) {
      if (std::find(header.begin(), header.end(), col) == header.end()) {
        throw SchemaError(std::string("csv header is missing column '") + col + "'");
      }
    }
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      if (!valid_utf8(line)) throw RowError{"line is not valid UTF-8"};
      Fields f;
      if (format == RegistryFormat::csv) {
        std::vector<std::string> cells;
        try {
          cells = split_csv_line(line);
        } catch (const std::invalid_argument& e) {
          throw RowError{e.what()};
        }
        if (cells.size() != header.size()) {
          throw RowError{"expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(cells.size())};
        }
        for (std::size_t i = 0; i < header.size(); ++i) f[header[i]] = cells[i];
      } else {
        f = fields_from_json(line);
      }
      result.records.push_back(make_record(f, year));
    } catch (const RowError& e) {
      result.rejects.push_back({line_no, e.reason});
    }
  }
  if (in.bad()) throw IoError("read error in registry stream");
  return result;
}

ParseResult parse_registry_file(const std::filesystem::path& path, RegistryFormat format,
                                const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open registry file " + path.string());
  return parse_registry(in, format, opts);
}

std::string default_canonical(std::string_view label) {
  std::string out;
  bool pending_space = false;
  for (char c : label) {
    bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

std::string to_string(AliasScope s) { return s == AliasScope::cpo ? "cpo" : "manufacturer"; }

void AliasMap::add(std::string_view raw, std::string_view canonical) {
  std::string key = default_canonical(raw);
  std::string target(canonical);
  if (key.empty()) throw std::invalid_argument("alias with empty raw label");
  if (target.empty() || target != default_canonical(target)) {
    throw std::invalid_argument("alias target '" + target +
                                "' is not canonical (lowercase, trimmed, single spaces)");
  }
  if (auto it = entries_.find(target); it != entries_.end() && it->second != target) {
    throw std::invalid_argument("alias target '" + target + "' is itself mapped to '" +
                                it->second + "'");
  }
  if (key != target) {
    for (const auto& [k, v] : entries_) {
      if (v == key) {
        throw std::invalid_argument("alias '" + key + "' is already a canonical target");
      }
    }
  }
  if (auto it = entries_.find(key); it != entries_.end() && it->second != target) {
    throw std::invalid_argument("conflicting aliases for '" + key + "'");
  }
  entries_[key] = target;
}

std::string AliasMap::canonicalize(std::string_view label) const {
  std::string key = default_canonical(label);
  auto it = entries_.find(key);
  return it == entries_.end() ? key : it->second;
}

AliasMap AliasMap::load_csv(std::istream& in, AliasScope scope) {
  AliasMap m(scope);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) {
      throw std::invalid_argument("alias file line " + std::to_string(line_no) +
                                  ": expected raw_label,canonical");
    }
    if (line_no == 1 && trim(cells[0]) == "raw_label" && trim(cells[1]) == "canonical") continue;
    try {
      m.add(cells[0], trim(cells[1]));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("alias file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

AliasMap AliasMap::load_csv_file(const std::filesystem::path& path, AliasScope scope) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alias file " + path.string());
  return load_csv(in, scope);
}

std::vector<RawStationRecord> normalize_labels(const std::vector<RawStationRecord>& records,
                                               const AliasMap& cpo_aliases,
                                               const AliasMap& mfr_aliases) {
  if (cpo_aliases.scope() != AliasScope::cpo || mfr_aliases.scope() != AliasScope::manufacturer) {
    throw std::invalid_argument("alias maps passed with the wrong scopes");
  }
  std::vector<RawStationRecord> out = records;
  for (auto& r : out) {
    r.cpo_label = cpo_aliases.canonicalize(r.cpo_label);
    if (r.mo_label) r.mo_label = cpo_aliases.canonicalize(*r.mo_label);
    if (r.manufacturer_label) {
      r.manufacturer_label = mfr_aliases.canonicalize(*r.manufacturer_label);
      if (r.manufacturer_label->empty()) r.manufacturer_label.reset();
    }
    if (r.model_label) {
      r.model_label = default_canonical(*r.model_label);
      if (r.model_label->empty()) r.model_label.reset();
    }
    if (r.mo_label && r.mo_label->empty()) r.mo_label.reset();
  }
  return out;
}

std::uint64_t AnalysisSet::retained_points() const {
  std::uint64_t n = 0;
  for (const auto& r : records) n += r.charge_point_count;
  return n;
}

AnalysisSet build_analysis_set(const std::vector<RawStationRecord>& records,
                               const std::string& country, const BuildOptions& opts) {
  AnalysisSet set;
  set.country = country;
  for (char& c : set.country) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  for (const auto& r : records) {
    ++set.total_input;
    set.total_input_points += r.charge_point_count;
    if (r.connector != ConnectorStandard::ccs) {
      ++set.dropped_non_ccs;
      set.dropped_non_ccs_points += r.charge_point_count;
      continue;
    }
    if (r.country != set.country) {
      ++set.dropped_wrong_country;
      set.dropped_wrong_country_points += r.charge_point_count;
      continue;
    }
    if (!r.manufacturer_label || r.manufacturer_label->empty()) {
      ++set.dropped_no_manufacturer;
      set.dropped_no_manufacturer_points += r.charge_point_count;
      continue;
    }
    StationRecord s;
    s.source_id = r.source_id;
    s.country = r.country;
    s.latitude = r.latitude;
    s.longitude = r.longitude;
    s.cpo = r.cpo_label;
    if (auto it = opts.cpo_reattribution.find(s.cpo); it != opts.cpo_reattribution.end()) {
      s.cpo = it->second;
    }
    s.mo = r.mo_label;
    s.manufacturer = *r.manufacturer_label;
    s.model = r.model_label;
    s.charge_point_count = r.charge_point_count;
    s.install_year = r.install_year;
    s.max_power_kw = r.max_power_kw;
    set.records.push_back(std::move(s));
  }
  std::stable_sort(set.records.begin(), set.records.end(),
                   [](const auto& a, const auto& b) { return a.source_id < b.source_id; });
  return set;
}

namespace {

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

nlohmann::json to_json(const AnalysisSet& set) {
  nlohmann::json j = artifact_header("analysis_set");
  j["country"] = set.country;
  j["total_input"] = set.total_input;
  j["dropped_non_ccs"] = set.dropped_non_ccs;
  j["dropped_wrong_country"] = set.dropped_wrong_country;
  j["dropped_no_manufacturer"] = set.dropped_no_manufacturer;
  j["points"] = {{"total_input", set.total_input_points},
                 {"dropped_non_ccs", set.dropped_non_ccs_points},
                 {"dropped_wrong_country", set.dropped_wrong_country_points},
                 {"dropped_no_manufacturer", set.dropped_no_manufacturer_points},
                 {"retained", set.retained_points()}};
  auto& recs = j["records"] = nlohmann::json::array();
  for (const auto& r : set.records) {
    recs.push_back({{"source_id", r.source_id},
                    {"country", r.country},
                    {"lat", r.latitude},
                    {"lon", r.longitude},
                    {"cpo", r.cpo},
                    {"mo", opt_json(r.mo)},
                    {"manufacturer", r.manufacturer},
                    {"model", opt_json(r.model)},
                    {"charge_points", r.charge_point_count},
                    {"install_year", opt_json(r.install_year)},
                    {"max_power_kw", opt_json(r.max_power_kw)}});
  }
  return j;
}

AnalysisSet analysis_set_from_json(const nlohmann::json& j) {
  check_artifact(j, "analysis_set");
  try {
    AnalysisSet set;
    set.country = j.at("country").get<std::string>();
    set.total_input = j.at("total_input").get<std::uint64_t>();
    set.dropped_non_ccs = j.at("dropped_non_ccs").get<std::uint64_t>();
    set.dropped_wrong_country = j.at("dropped_wrong_country").get<std::uint64_t>();
    set.dropped_no_manufacturer = j.at("dropped_no_manufacturer").get<std::uint64_t>();
    const auto& p = j.at("points");
    set.total_input_points = p.at("total_input").get<std::uint64_t>();
    set.dropped_non_ccs_points = p.at("dropped_non_ccs").get<std::uint64_t>();
    set.dropped_wrong_country_points = p.at("dropped_wrong_country").get<std::uint64_t>();
    set.dropped_no_manufacturer_points = p.at("dropped_no_manufacturer").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      StationRecord s;
      s.source_id = r.at("source_id").get<std::string>();
      s.country = r.at("country").get<std::string>();
      s.latitude = r.at("lat").get<double>();
      s.longitude = r.at("lon").get<double>();
      s.cpo = r.at("cpo").get<std::string>();
      s.mo = opt_from<std::string>(r, "mo");
      s.manufacturer = r.at("manufacturer").get<std::string>();
      s.model = opt_from<std::string>(r, "model");
      s.charge_point_count = r.at("charge_points").get<std::uint32_t>();
      s.install_year = opt_from<int>(r, "install_year");
      s.max_power_kw = opt_from<double>(r, "max_power_kw");
      if (s.cpo.empty() || s.manufacturer.empty() || s.charge_point_count == 0) {
        throw ArtifactError("analysis set record " + s.source_id + " violates invariants");
      }
      set.records.push_back(std::move(s));
    }
    if (set.total_input != set.records.size() + set.dropped_non_ccs + set.dropped_wrong_country +
                               set.dropped_no_manufacturer) {
      throw ArtifactError("analysis set counters do not add up");
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("analysis set: ") + e.what());
  }
}

nlohmann::json to_json(const std::vector<Reject>& rejects) {
  auto j = nlohmann::json::array();
  for (const auto& r : rejects) j.push_back({{"line", r.line}, {"reason", r.reason}});
  return j;
}

}  // namespace chargescope::dataset
