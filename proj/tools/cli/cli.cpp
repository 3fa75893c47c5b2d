#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chargescope/artifact.hpp"
#include "chargescope/dataset.hpp"
#include "chargescope/evse_sim.hpp"
#include "chargescope/extrapolation.hpp"
#include "chargescope/market.hpp"
#include "chargescope/net.hpp"
#include "chargescope/orchestrator.hpp"
#include "chargescope/pki.hpp"
#include "chargescope/slac/constants.hpp"
#include "chargescope/tls.hpp"

namespace chargescope::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad arguments or unusable input files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("no such file: " + p.string());
}

void require_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw InputError("no such directory: " + p.string());
}

json load_json(const fs::path& p) {
  require_file(p);
  return read_json_file(p);
}

void write_output(const std::optional<fs::path>& path, const std::string& text, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  if (path->has_parent_path()) fs::create_directories(path->parent_path());
  std::ofstream f(*path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path->string());
  f << text;
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms
     << 'Z';
  return os.str();
}

std::string fmt_pct(double share) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << share * 100.0;
  return os.str();
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string format = "csv";
  std::string country = "DE";
  std::optional<std::string> alias_dir;
  std::optional<std::string> cpo_aliases;
  std::optional<std::string> mfr_aliases;
  std::vector<std::string> reattribute;
  std::optional<int> current_year;
  std::optional<std::string> output;
  std::optional<std::string> rejects;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  dataset::RegistryFormat format;
  try {
    format = dataset::registry_format_from_string(a.format);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  dataset::AliasMap cpo(dataset::AliasScope::cpo);
  dataset::AliasMap mfr(dataset::AliasScope::manufacturer);
  std::optional<fs::path> cpo_file = a.cpo_aliases ? std::optional<fs::path>(*a.cpo_aliases) : std::nullopt;
  std::optional<fs::path> mfr_file = a.mfr_aliases ? std::optional<fs::path>(*a.mfr_aliases) : std::nullopt;
  if (a.alias_dir) {
    fs::path dir(*a.alias_dir);
    require_dir(dir);
    if (!cpo_file && fs::exists(dir / "cpo.csv")) cpo_file = dir / "cpo.csv";
    if (!mfr_file && fs::exists(dir / "manufacturer.csv")) mfr_file = dir / "manufacturer.csv";
  }
  if (cpo_file) {
    require_file(*cpo_file);
    cpo = dataset::AliasMap::load_csv_file(*cpo_file, dataset::AliasScope::cpo);
  }
  if (mfr_file) {
    require_file(*mfr_file);
    mfr = dataset::AliasMap::load_csv_file(*mfr_file, dataset::AliasScope::manufacturer);
  }

  dataset::BuildOptions build;
  for (const auto& r : a.reattribute) {
    auto eq = r.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == r.size())
      throw InputError("--reattribute expects FROM=TO, got '" + r + "'");
    build.cpo_reattribution[dataset::default_canonical(r.substr(0, eq))] =
        dataset::default_canonical(r.substr(eq + 1));
  }

  dataset::ParseOptions popts;
  popts.current_year = a.current_year;
  std::vector<dataset::RawStationRecord> records;
  std::vector<json> rejects;
  for (const auto& input : a.inputs) {
    require_file(input);
    auto parsed = dataset::parse_registry_file(input, format, popts);
    for (const auto& rj : dataset::to_json(parsed.rejects)) {
      json entry = rj;
      entry["file"] = fs::path(input).filename().string();
      rejects.push_back(entry);
    }
    for (const auto& rej : parsed.rejects)
      err << input << ":" << rej.line << ": rejected: " << rej.reason << "\n";
    records.insert(records.end(), parsed.records.begin(), parsed.records.end());
  }

  auto normalized = dataset::normalize_labels(records, cpo, mfr);
  auto set = dataset::build_analysis_set(normalized, a.country, build);

  err << "read " << set.total_input << " records (" << rejects.size() << " rejected rows)\n"
      << "dropped non-CCS: " << set.dropped_non_ccs << " records, " << set.dropped_non_ccs_points
      << " charge points\n"
      << "dropped other country: " << set.dropped_wrong_country << " records, "
      << set.dropped_wrong_country_points << " charge points\n"
      << "dropped no manufacturer: " << set.dropped_no_manufacturer << " records, "
      << set.dropped_no_manufacturer_points << " charge points\n"
      << "retained: " << set.records.size() << " records, " << set.retained_points()
      << " charge points\n";
  if (set.records.empty())
    err << "warning: analysis set for " << set.country << " is empty\n";

  if (a.rejects) {
    std::ostringstream os;
    for (const auto& r : rejects) os << r.dump() << "\n";
    write_output(fs::path(*a.rejects), os.str(), out);
  }
  write_output(a.output ? std::optional<fs::path>(*a.output) : std::nullopt,
               dump_stable(dataset::to_json(set)), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  std::string input;
  std::optional<std::string> output;
  std::optional<std::string> shares;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream& err) {
  auto set = dataset::analysis_set_from_json(load_json(a.input));
  auto clusters = market::build_clusters(set);
  market::check_cluster_invariants(clusters);
  err << clusters.size() << " clusters over " << set.retained_points() << " charge points\n";
  if (a.shares) {
    json j = artifact_header("manufacturer_shares");
    j["shares"] = market::manufacturer_shares(set);
    write_output(fs::path(*a.shares), dump_stable(j), out);
  }
  write_output(a.output ? std::optional<fs::path>(*a.output) : std::nullopt,
               dump_stable(market::to_json(clusters)), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string clusters;
  std::uint32_t budget = 0;
  std::uint32_t per_cluster = 2;
  std::optional<std::string> analysis_set;
  std::optional<std::string> output;
};

int cmd_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
  auto clusters = market::clusters_from_json(load_json(a.clusters));
  std::vector<dataset::StationRecord> stations;
  if (a.analysis_set) stations = dataset::analysis_set_from_json(load_json(*a.analysis_set)).records;
  if (a.budget == 0) throw InputError("--budget must be at least 1");
  if (a.per_cluster == 0) throw InputError("--stations-per-cluster must be at least 1");
  auto plan = market::plan_sample(clusters, a.budget, a.per_cluster, stations);
  for (const auto& c : plan.selected)
    err << market::to_string(c.key) << ": " << c.rationale << "\n";
  err << "planned coverage " << fmt_pct(plan.planned_coverage) << "% of charge points\n";
  write_output(a.output ? std::optional<fs::path>(*a.output) : std::nullopt,
               dump_stable(market::to_json(plan)), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string mode = "desk";
  std::optional<std::string> profile;
  std::vector<std::string> only;
  std::optional<std::string> trust;
  std::string out_dir;
  std::optional<std::string> captures;
  std::optional<std::string> findings;
  unsigned jobs = 1;
  bool authorized = false;
  std::optional<std::string> interface;
  std::optional<std::string> station_id;
  std::optional<std::string> cpo;
  std::optional<std::string> manufacturer;
  std::optional<std::string> model;
  std::optional<int> year;
};

tls::TrustStore load_trust(const std::optional<std::string>& trust,
                           const std::optional<fs::path>& profile) {
  fs::path dir;
  if (trust) {
    dir = *trust;
  } else if (profile && fs::is_directory(profile->parent_path() / "pki" / "trust")) {
    dir = profile->parent_path() / "pki" / "trust";
  } else {
    throw InputError("no trust directory; pass --trust or set CHARGESCOPE_TRUST_DIR");
  }
  require_dir(dir);
  return tls::TrustStore::load_directory(dir);
}

std::string station_line(const orchestrator::StationReport& r) {
  std::ostringstream os;
  const auto& d = r.derived;
  os << r.station.id << ": tls=" << (d.supports_tls ? "yes" : "no")
     << " iso2=" << (d.supports_iso2 ? "yes" : "no") << " din=" << (d.supports_din ? "yes" : "no")
     << " preferred=" << (d.preferred_protocol ? apphand::to_string(*d.preferred_protocol) : "none");
  for (const auto& s : r.scenarios)
    if (s.failure) os << " s" << s.scenario_id << "=" << *s.failure;
  return os.str();
}

int cmd_probe(const ProbeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.mode != "desk" && a.mode != "live") throw InputError("--mode must be desk or live");

  orchestrator::RunConfig cfg;
  if (a.captures) {
    cfg.capture_dir = fs::path(*a.captures);
    fs::create_directories(*cfg.capture_dir);
  }
  fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);

  std::vector<orchestrator::StationReport> reports;
  std::vector<json> stamps;

  if (a.mode == "live") {
    if (!a.authorized)
      throw InputError("live mode talks to real charging stations; pass --i-am-authorized "
                       "to confirm you have the operator's permission");
    if (!a.interface) throw InputError("live mode needs --interface");
    if (!a.station_id || !a.cpo || !a.manufacturer || !a.model)
      throw InputError("live mode needs --station-id, --cpo, --manufacturer and --model");
    cfg.trust = load_trust(a.trust, std::nullopt);
    orchestrator::LiveTargetConfig lc;
    lc.interface = *a.interface;
    lc.station.id = *a.station_id;
    lc.station.cluster = {dataset::default_canonical(*a.cpo),
                          dataset::default_canonical(*a.manufacturer)};
    lc.station.model = *a.model;
    lc.station.install_year = a.year;
    lc.station.year_label = a.year ? std::to_string(*a.year) : "?";
    orchestrator::LiveTarget target(lc);
    std::string started = utc_now();
    reports.push_back(orchestrator::run_station_test(target, cfg));
    stamps.push_back({{"station", lc.station.id}, {"started", started}, {"finished", utc_now()}});
  } else {
    if (!a.profile) throw InputError("desk mode needs --profile or CHARGESCOPE_PROFILES");
    fs::path profile_path(*a.profile);
    require_file(profile_path);
    auto profiles = evse::load_profile_fixtures(profile_path);
    if (!a.only.empty()) {
      std::set<std::string> wanted(a.only.begin(), a.only.end());
      for (const auto& name : wanted) {
        if (std::none_of(profiles.begin(), profiles.end(),
                         [&](const auto& p) { return p.name == name; }))
          throw InputError("no profile named '" + name + "' in " + profile_path.string());
      }
      std::erase_if(profiles, [&](const auto& p) { return !wanted.contains(p.name); });
    }
    cfg.trust = load_trust(a.trust, profile_path);

    reports.resize(profiles.size());
    stamps.resize(profiles.size());
    std::vector<std::string> errors(profiles.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < profiles.size(); i = next++) {
        std::string started = utc_now();
        try {
          orchestrator::DeskTarget target(profiles[i]);
          reports[i] = orchestrator::run_station_test(target, cfg);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
        stamps[i] = {{"station", profiles[i].name}, {"started", started}, {"finished", utc_now()}};
      }
    };
    unsigned jobs = std::clamp<unsigned>(a.jobs, 1, 64);
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(work);
    work();
    pool.clear();
    for (std::size_t i = 0; i < errors.size(); ++i)
      if (!errors[i].empty())
        throw std::runtime_error("station " + profiles[i].name + ": " + errors[i]);
  }

  for (const auto& r : reports) {
    write_json_file(out_dir / (r.station.id + ".json"), orchestrator::to_json(r));
    out << station_line(r) << "\n";
  }
  {
    std::ofstream f(out_dir / "_timestamps.jsonl", std::ios::binary);
    for (const auto& s : stamps) f << s.dump() << "\n";
  }
  if (a.findings) {
    auto all = orchestrator::load_reports(out_dir);
    write_json_file(*a.findings, orchestrator::to_json(orchestrator::validate_assumptions(all)));
  }
  err << reports.size() << " station report(s) written to " << out_dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::string> profile;
  std::string station;
  std::optional<std::string> trust;
  std::optional<std::string> interface;
  std::optional<std::string> advertise;
  std::uint16_t port = 50021;
  int sessions = 1;
};

json session_json(const evse::EvseSessionLog& s) {
  json j;
  j["slac_matched"] = s.slac.matched;
  j["slac_detail"] = s.slac.detail;
  j["sdp_requests"] = s.sdp_requests.size();
  j["sdp_answer"] = s.sdp_answer ? json(v2gtp::to_string(s.sdp_answer->security)) : json(nullptr);
  j["tls_served"] = s.tls_served;
  j["handshake_chosen"] = nullptr;
  if (s.handshake_response && s.handshake_request) {
    if (auto p = apphand::chosen_protocol(*s.handshake_response, *s.handshake_request))
      j["handshake_chosen"] = apphand::to_string(*p);
  }
  j["ignored_after_negotiation"] = s.ignored_after_negotiation;
  j["notes"] = s.notes;
  return j;
}

int simulate_live(const evse::EvseProfile& profile, const SimulateArgs& a, std::ostream& out,
                  std::ostream& err) {
  if (!a.advertise) throw InputError("serving on an interface needs --advertise ADDRESS");
  unsigned idx = 0;
  try {
    idx = interface_index(*a.interface);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  Endpoint advertised;
  try {
    advertised = parse_endpoint(*a.advertise, a.port);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  advertised.scope_id = idx;
  auto listen = parse_endpoint("::", a.port);
  listen.scope_id = idx;
  TcpListener listener(listen);

  for (int n = 0; n < a.sessions; ++n) {
    RawEthernetChannel raw(*a.interface, slac::kEthertypeHomePlug);
    auto sdp_local = parse_endpoint("::", 15118);
    sdp_local.scope_id = idx;
    UdpChannel sdp(sdp_local, parse_endpoint("::", 0), true);
    evse::EvseOptions opts;
    opts.slac.evse_mac = raw.mac();
    opts.slac.wait_timeout = Millis(60000);
    evse::EvseLinks links;
    links.slac = &raw;
    links.sdp = &sdp;
    links.advertised = advertised;
    links.accept = [&](Clock::time_point deadline) -> std::unique_ptr<ByteStream> {
      return listener.accept(deadline);
    };
    CaptureLog log;
    auto result = evse::run_evse(profile, links, log, opts);
    out << session_json(result).dump() << "\n";
    err << "session " << n + 1 << " done\n";
  }
  return kOk;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.profile) throw InputError("--profile or CHARGESCOPE_PROFILES is required");
  fs::path profile_path(*a.profile);
  require_file(profile_path);
  auto profiles = evse::load_profile_fixtures(profile_path);
  auto it = std::find_if(profiles.begin(), profiles.end(),
                         [&](const auto& p) { return p.name == a.station; });
  if (it == profiles.end())
    throw InputError("no profile named '" + a.station + "' in " + profile_path.string());
  if (a.interface) return simulate_live(*it, a, out, err);

  // Desk: the probe runs against the simulator in-process and both sides are shown.
  orchestrator::RunConfig cfg;
  cfg.trust = load_trust(a.trust, profile_path);
  orchestrator::DeskTarget target(*it);
  auto report = orchestrator::run_station_test(target, cfg);
  json j = artifact_header("simulation");
  j["station_report"] = orchestrator::to_json(report);
  j["sessions"] = json::array();
  for (const auto& run : target.runs()) {
    json s = session_json(run.session);
    s["scenario_id"] = run.scenario_id;
    s["error"] = run.error ? json(*run.error) : json(nullptr);
    std::vector<std::string> violations;
    for (const auto& v : orchestrator::scan_transcript(run.log->entries()))
      violations.push_back(std::to_string(v.seq) + ": " + v.reason);
    s["transcript_violations"] = violations;
    j["sessions"].push_back(s);
  }
  out << dump_stable(j);
  err << station_line(report) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ExtrapolateArgs {
  std::string clusters;
  std::string reports;
  std::string policy = "block";
  std::optional<std::string> reference;
  std::optional<std::string> findings;
  std::optional<std::string> output;
};

int cmd_extrapolate(const ExtrapolateArgs& a, std::ostream& out, std::ostream& err) {
  extrapolation::ConflictPolicy policy;
  try {
    policy = extrapolation::conflict_policy_from_string(a.policy);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  auto clusters = market::clusters_from_json(load_json(a.clusters));
  require_dir(a.reports);
  auto reports = orchestrator::load_reports(a.reports);
  auto findings = orchestrator::validate_assumptions(reports);
  for (const auto& f : findings) {
    if (f.consistent) continue;
    err << "inconsistent " << orchestrator::to_string(f.dimension) << " in "
        << market::to_string(f.cluster);
    for (const auto& w : f.witnesses) err << " [" << w.first << " vs " << w.second << "]";
    err << "\n";
  }
  if (a.findings) write_json_file(*a.findings, orchestrator::to_json(findings));

  auto summary = extrapolation::aggregate(extrapolation::extrapolate(clusters, reports, policy));
  if (a.reference) {
    auto notes = extrapolation::compare_with_reference(summary, load_json(*a.reference));
    summary.notes.insert(summary.notes.end(), notes.begin(), notes.end());
  }
  err << "covered " << summary.covered_share().percent() << "% of charge points, TLS "
      << summary.tls_share_of_all().percent() << "% of all, ISO 15118-2 "
      << summary.iso2_share_of_all().percent() << "% of all\n";
  write_output(a.output ? std::optional<fs::path>(*a.output) : std::nullopt,
               dump_stable(extrapolation::to_json(summary)), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string summary;
  std::string format = "markdown";
  std::optional<std::string> output;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  extrapolation::Format format;
  try {
    format = extrapolation::format_from_string(a.format);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  auto summary = extrapolation::summary_from_json(load_json(a.summary));
  write_output(a.output ? std::optional<fs::path>(*a.output) : std::nullopt,
               extrapolation::render_report(summary, format), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct PkiArgs {
  std::string out_dir;
  std::string root_name = "hubject-v2g-root";
};

int cmd_pki(const PkiArgs& a, std::ostream&, std::ostream& err) {
  fs::create_directories(a.out_dir);
  pki::write_test_pki(pki::generate_test_pki(), a.out_dir, a.root_name);
  err << "test PKI written to " << a.out_dir << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Measure and extrapolate ISO 15118 / TLS support of DC charging stations"};
  app.name("chargescope");
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build the analysis set from registry exports");
  c_ingest->add_option("inputs", ingest.inputs, "Registry files")->required();
  c_ingest->add_option("--format", ingest.format, "csv or jsonl")->capture_default_str();
  c_ingest->add_option("--country", ingest.country, "ISO 3166 alpha-2 code")->capture_default_str();
  c_ingest->add_option("--aliases", ingest.alias_dir, "Directory with cpo.csv / manufacturer.csv")
      ->envname("CHARGESCOPE_ALIAS_DIR");
  c_ingest->add_option("--cpo-aliases", ingest.cpo_aliases, "CPO alias csv");
  c_ingest->add_option("--manufacturer-aliases", ingest.mfr_aliases, "Manufacturer alias csv");
  c_ingest->add_option("--reattribute", ingest.reattribute, "FROM=TO CPO re-attribution");
  c_ingest->add_option("--current-year", ingest.current_year, "Upper bound for install years");
  c_ingest->add_option("-o,--output", ingest.output, "Analysis set file (stdout if absent)");
  c_ingest->add_option("--rejects", ingest.rejects, "Write rejected rows as JSON lines");

  ClusterArgs cluster;
  auto* c_cluster = app.add_subcommand("cluster", "Group the analysis set into (CPO, OEM) clusters");
  c_cluster->add_option("-i,--input", cluster.input, "Analysis set")->required();
  c_cluster->add_option("-o,--output", cluster.output, "Cluster table (stdout if absent)");
  c_cluster->add_option("--shares", cluster.shares, "Write manufacturer shares");

  PlanArgs plan;
  auto* c_plan = app.add_subcommand("plan", "Choose clusters to test under a station budget");
  c_plan->add_option("-c,--clusters", plan.clusters, "Cluster table")->required();
  c_plan->add_option("--budget", plan.budget, "Number of clusters to test")->required();
  c_plan->add_option("--stations-per-cluster", plan.per_cluster)->capture_default_str();
  c_plan->add_option("--analysis-set", plan.analysis_set, "Pick representative stations from it");
  c_plan->add_option("-o,--output", plan.output, "Sample plan (stdout if absent)");

  ProbeArgs probe;
  auto* c_probe = app.add_subcommand("probe", "Run the four test scenarios against stations");
  c_probe->add_option("--mode", probe.mode, "desk or live")->capture_default_str();
  c_probe->add_option("--profile", probe.profile, "Station profiles (desk)")
      ->envname("CHARGESCOPE_PROFILES");
  c_probe->add_option("--station", probe.only, "Only these profile names (desk)");
  c_probe->add_option("--trust", probe.trust, "Directory of trusted root PEMs")
      ->envname("CHARGESCOPE_TRUST_DIR");
  c_probe->add_option("--out", probe.out_dir, "Report directory")->required();
  c_probe->add_option("--captures", probe.captures, "Transcript directory");
  c_probe->add_option("--findings", probe.findings, "Write assumption findings");
  c_probe->add_option("--jobs", probe.jobs, "Stations tested concurrently (desk)")
      ->capture_default_str();
  c_probe->add_flag("--i-am-authorized", probe.authorized,
                    "Confirm permission to test the live station");
  c_probe->add_option("--interface", probe.interface, "Network interface (live)");
  c_probe->add_option("--station-id", probe.station_id, "Station id (live)");
  c_probe->add_option("--cpo", probe.cpo, "Operator (live)");
  c_probe->add_option("--manufacturer", probe.manufacturer, "Manufacturer (live)");
  c_probe->add_option("--model", probe.model, "Model (live)");
  c_probe->add_option("--year", probe.year, "Install year (live)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run the station simulator for one profile");
  c_sim->add_option("--profile", sim.profile, "Station profiles")->envname("CHARGESCOPE_PROFILES");
  c_sim->add_option("--station", sim.station, "Profile name")->required();
  c_sim->add_option("--trust", sim.trust, "Directory of trusted root PEMs")
      ->envname("CHARGESCOPE_TRUST_DIR");
  c_sim->add_option("--interface", sim.interface, "Serve on this interface instead of in-process");
  c_sim->add_option("--advertise", sim.advertise, "Address put into SDP responses");
  c_sim->add_option("--port", sim.port, "TCP port")->capture_default_str();
  c_sim->add_option("--sessions", sim.sessions, "Sessions to serve")->capture_default_str();

  ExtrapolateArgs ext;
  auto* c_ext = app.add_subcommand("extrapolate", "Project station results onto all charge points");
  c_ext->add_option("-c,--clusters", ext.clusters, "Cluster table")->required();
  c_ext->add_option("-r,--reports", ext.reports, "Station report directory")->required();
  c_ext->add_option("--conflict-policy", ext.policy, "block or majority")->capture_default_str();
  c_ext->add_option("--reference", ext.reference, "Printed values to compare against")
      ->envname("CHARGESCOPE_REFERENCE");
  c_ext->add_option("--findings", ext.findings, "Write assumption findings");
  c_ext->add_option("-o,--output", ext.output, "National summary (stdout if absent)");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Render a national summary");
  c_rep->add_option("-s,--summary", rep.summary, "National summary")->required();
  c_rep->add_option("--output", rep.format, "json, csv or markdown")->capture_default_str();
  c_rep->add_option("-o,--file", rep.output, "Destination (stdout if absent)");

  PkiArgs pk;
  auto* c_pki = app.add_subcommand("pki", "Generate the test certificate hierarchy");
  c_pki->add_option("--out", pk.out_dir, "Output directory")->required();
  c_pki->add_option("--root-name", pk.root_name)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << "run 'chargescope " << sub->get_name() << " --help' for usage\n";
    else
      err << "run 'chargescope --help' for usage\n";
    return kInputError;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, out, err);
    if (c_cluster->parsed()) return cmd_cluster(cluster, out, err);
    if (c_plan->parsed()) return cmd_plan(plan, out, err);
    if (c_probe->parsed()) return cmd_probe(probe, out, err);
    if (c_sim->parsed()) return cmd_simulate(sim, out, err);
    if (c_ext->parsed()) return cmd_extrapolate(ext, out, err);
    if (c_rep->parsed()) return cmd_report(rep, out, err);
    if (c_pki->parsed()) return cmd_pki(pk, out, err);
  } catch (const FormatVersionError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatMismatch;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const dataset::SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const dataset::IoError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const evse::ProfileError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kInputError;
}

}  // namespace chargescope::cli
