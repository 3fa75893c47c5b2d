#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "chargescope/artifact.hpp"
#include "chargescope/orchestrator.hpp"
#include "chargescope/tls.hpp"
#include "cli.hpp"
#include "paths.hpp"

using namespace chargescope;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> json_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::string data(const std::string& name) { return (testsupport::data_dir() / name).string(); }

const std::string kRegistry =
    (testsupport::source_dir() / "tests" / "fixtures" / "registry_10rows.csv").string();

}  // namespace

TEST(Cli, HelpExitsZero) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("extrapolate"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsInputError) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"plan", "-c", data("table2_clusters.json")}).code, 2);  // no --budget
}

TEST(Cli, MissingInputNamesPath) {
  auto r = run({"ingest", "/nonexistent/registry.csv"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/registry.csv"), std::string::npos);
}

TEST(Cli, IngestReportsDropsAndWritesSet) {
  TempDir tmp("cli-ingest");
  auto set = tmp.path() / "set.json";
  auto rejects = tmp.path() / "rejects.jsonl";
  auto r = run({"ingest", kRegistry, "--aliases", data("aliases"), "-o", set.string(),
                "--rejects", rejects.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("dropped non-CCS: 1 records, 2 charge points"), std::string::npos);
  EXPECT_NE(r.err.find("retained: 7 records, 32 charge points"), std::string::npos);
  EXPECT_NE(r.err.find(":7: rejected"), std::string::npos);
  auto j = read_json_file(set);
  EXPECT_EQ(j["kind"], "analysis_set");
  EXPECT_EQ(j["records"].size(), 7u);
  std::istringstream lines(slurp(rejects));
  int n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  EXPECT_EQ(n, 2);
}

TEST(Cli, UnknownCountryWarnsButSucceeds) {
  TempDir tmp("cli-country");
  auto r = run({"ingest", kRegistry, "--country", "XX", "-o", (tmp.path() / "s.json").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning: analysis set for XX is empty"), std::string::npos);
}

TEST(Cli, BadFormatOptionIsInputError) {
  EXPECT_EQ(run({"ingest", kRegistry, "--format", "xml"}).code, 2);
  TempDir tmp("cli-fmt");
  ASSERT_EQ(run({"probe", "--profile", data("table2.json"), "--station", "ionity-abb-hp-cp500",
                 "--out", (tmp.path() / "r").string()})
                .code,
            0);
  ASSERT_EQ(run({"extrapolate", "-c", data("table2_clusters.json"), "-r",
                 (tmp.path() / "r").string(), "-o", (tmp.path() / "s.json").string()})
                .code,
            0);
  EXPECT_EQ(run({"report", "-s", (tmp.path() / "s.json").string(), "--output", "pdf"}).code, 2);
  EXPECT_EQ(run({"extrapolate", "-c", data("table2_clusters.json"), "-r",
                 (tmp.path() / "r").string(), "--conflict-policy", "vote"})
                .code,
            2);
}

TEST(Cli, VersionMismatchExitsThree) {
  TempDir tmp("cli-version");
  auto j = read_json_file(data("table2_clusters.json"));
  j["format_version"] = 99;
  write_json_file(tmp.path() / "c.json", j);
  auto r = run({"plan", "-c", (tmp.path() / "c.json").string(), "--budget", "2"});
  EXPECT_EQ(r.code, 3);
  j["format_version"] = 1;
  j["kind"] = "sample_plan";
  write_json_file(tmp.path() / "c.json", j);
  EXPECT_EQ(run({"plan", "-c", (tmp.path() / "c.json").string(), "--budget", "2"}).code, 3);
}

TEST(Cli, MalformedArtifactIsInputError) {
  TempDir tmp("cli-malformed");
  std::ofstream(tmp.path() / "c.json") << "{ not json";
  EXPECT_EQ(run({"plan", "-c", (tmp.path() / "c.json").string(), "--budget", "2"}).code, 2);
}

TEST(Cli, PlanWithFullBudgetCoversAll) {
  auto r = run({"plan", "-c", data("table2_clusters.json"), "--budget", "29"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto plan = nlohmann::json::parse(r.out);
  EXPECT_EQ(plan["kind"], "sample_plan");
  EXPECT_EQ(plan["selected"].size(), 29u);
  EXPECT_NEAR(plan["planned_coverage"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(run({"plan", "-c", data("table2_clusters.json"), "--budget", "0"}).code, 2);
}

TEST(Cli, LiveModeNeedsAuthorization) {
  TempDir tmp("cli-live");
  auto r = run({"probe", "--mode", "live", "--interface", "lo", "--station-id", "x", "--cpo", "a",
                "--manufacturer", "b", "--model", "c", "--out", tmp.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--i-am-authorized"), std::string::npos);
  r = run({"probe", "--mode", "live", "--i-am-authorized", "--out", tmp.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--interface"), std::string::npos);
}

TEST(Cli, UnknownProfileNameIsInputError) {
  TempDir tmp("cli-noprofile");
  auto r = run({"probe", "--profile", data("table2.json"), "--station", "nope", "--out",
                tmp.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
}

TEST(Cli, EnvironmentOverridesProfilePath) {
  TempDir tmp("cli-env");
  ::setenv("CHARGESCOPE_PROFILES", data("table2.json").c_str(), 1);
  auto r = run({"probe", "--station", "lidl-abb-terra-60", "--out", tmp.path().string()});
  ::unsetenv("CHARGESCOPE_PROFILES");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp.path() / "lidl-abb-terra-60.json"));
}

TEST(Cli, DeskPipelineReproducesTable2) {
  TempDir tmp("cli-pipeline");
  auto reports = tmp.path() / "reports";
  auto captures = tmp.path() / "captures";
  auto r = run({"probe", "--profile", data("table2.json"), "--out", reports.string(), "--captures",
                captures.string(), "--jobs", "4", "--findings",
                (tmp.path() / "findings.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json_files(reports).size(), 20u);
  EXPECT_TRUE(fs::exists(captures / "ionity-abb-hp-cp500-s1.jsonl"));
  EXPECT_TRUE(fs::exists(captures / "ionity-abb-hp-cp500-s1.pcap"));

  auto summary = tmp.path() / "summary.json";
  r = run({"extrapolate", "-c", data("table2_clusters.json"), "-r", reports.string(),
           "--reference", data("table2_reference.json"), "-o", summary.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("covered 51.9%"), std::string::npos);

  r = run({"report", "-s", summary.string(), "--output", "markdown"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("| **% Of All** | 55.4 | | | 51.9 | | | 50.5 | 14.2 |"), std::string::npos);
  EXPECT_NE(r.out.find("| **% Of Clusters** | | | | 100.0 | | | 97.3 | 27.4 |"),
            std::string::npos);
  EXPECT_NE(r.out.find("printed 48.7"), std::string::npos);

  r = run({"report", "-s", summary.string(), "--output", "csv"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("cpo,cpo_pct,", 0), 0u);
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir tmp("cli-rerun");
  for (const char* pass : {"a", "b"}) {
    auto dir = tmp.path() / pass;
    ASSERT_EQ(run({"probe", "--profile", data("table2.json"), "--out", (dir / "reports").string(),
                   "--jobs", pass == std::string("a") ? "1" : "8"})
                  .code,
              0);
    ASSERT_EQ(run({"extrapolate", "-c", data("table2_clusters.json"), "-r",
                   (dir / "reports").string(), "-o", (dir / "summary.json").string()})
                  .code,
              0);
    ASSERT_EQ(run({"report", "-s", (dir / "summary.json").string(), "-o",
                   (dir / "report.md").string()})
                  .code,
              0);
  }
  EXPECT_EQ(json_files(tmp.path() / "a" / "reports"), json_files(tmp.path() / "b" / "reports"));
  EXPECT_EQ(slurp(tmp.path() / "a" / "summary.json"), slurp(tmp.path() / "b" / "summary.json"));
  EXPECT_EQ(slurp(tmp.path() / "a" / "report.md"), slurp(tmp.path() / "b" / "report.md"));
}

TEST(Cli, TimestampsOnlyInSidecar) {
  TempDir tmp("cli-stamps");
  ASSERT_EQ(run({"probe", "--profile", data("table2.json"), "--station", "aral-alpitronic-hyc300",
                 "--out", tmp.path().string()})
                .code,
            0);
  std::regex stamp(R"(T\d\d:\d\d:\d\d\.\d{3}Z)");
  EXPECT_FALSE(std::regex_search(slurp(tmp.path() / "aral-alpitronic-hyc300.json"), stamp));
  EXPECT_TRUE(std::regex_search(slurp(tmp.path() / "_timestamps.jsonl"), stamp));
  // The sidecar does not disturb report loading.
  EXPECT_EQ(orchestrator::load_reports(tmp.path()).size(), 1u);
}

TEST(Cli, ReportsFromUnknownClusterAreRejected) {
  TempDir tmp("cli-unknown");
  ASSERT_EQ(run({"probe", "--profile", data("table2.json"), "--station", "lidl-abb-terra-60",
                 "--out", tmp.path().string()})
                .code,
            0);
  TempDir set_dir("cli-unknown-set");
  auto set = set_dir.path() / "set.json";
  ASSERT_EQ(run({"ingest", kRegistry, "--aliases", data("aliases"), "-o", set.string()}).code, 0);
  auto clusters = set_dir.path() / "clusters.json";
  ASSERT_EQ(run({"cluster", "-i", set.string(), "-o", clusters.string()}).code, 0);
  auto r = run({"extrapolate", "-c", clusters.string(), "-r", tmp.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("lidl"), std::string::npos);
}

TEST(Cli, SimulateShowsBothSides) {
  auto r = run({"simulate", "--profile", data("table2.json"), "--station", "ionity-abb-hp-cp500"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["kind"], "simulation");
  ASSERT_EQ(j["sessions"].size(), 4u);
  for (const auto& s : j["sessions"]) {
    EXPECT_TRUE(s["transcript_violations"].empty());
    EXPECT_TRUE(s["error"].is_null());
  }
  EXPECT_EQ(j["sessions"][0]["tls_served"], true);
  EXPECT_EQ(j["station_report"]["derived"]["supports_tls"], true);
}

TEST(Cli, PkiWritesLoadableTrustStore) {
  TempDir tmp("cli-pki");
  auto r = run({"pki", "--out", tmp.path().string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(tmp.path() / "secc-chain.pem"));
  EXPECT_TRUE(fs::exists(tmp.path() / "secc-chain-expired.pem"));
  auto trust = tls::TrustStore::load_directory(tmp.path() / "trust");
  EXPECT_EQ(trust.roots().size(), 1u);
}
