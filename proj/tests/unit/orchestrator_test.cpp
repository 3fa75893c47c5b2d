#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <fstream>

#include "chargescope/artifact.hpp"
#include "closed_loop.hpp"

using namespace chargescope;
using namespace chargescope::orchestrator;
using apphand::Protocol;

namespace {

StationReport probe(const evse::EvseProfile& p, RunConfig cfg = testsupport::desk_config(),
                    std::vector<SimulatorRun>* runs = nullptr,
                    std::vector<std::vector<CaptureEntry>>* ev_logs = nullptr) {
  DeskTarget target(p);
  auto report = run_station_test(target, cfg, [&](int, const CaptureLog& log) {
    if (ev_logs) ev_logs->push_back(log.entries());
  });
  if (runs) *runs = target.runs();
  return report;
}

const ScenarioOutcome& outcome(const StationReport& r, int id) {
  for (const auto& o : r.scenarios) {
    if (o.scenario_id == id) return o;
  }
  throw std::runtime_error("missing scenario");
}

TEST(Scenarios, StandardSet) {
  const auto& s = standard_scenarios();
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].sdp_security, v2gtp::Security::TlsRequired);
  EXPECT_EQ(s[1].entries.size(), 1u);
  EXPECT_EQ(apphand::protocol_for_namespace(s[1].entries[0].namespace_uri), Protocol::iso15118_2);
  EXPECT_EQ(apphand::protocol_for_namespace(s[3].entries[0].namespace_uri), Protocol::din70121);
  EXPECT_EQ(s[2].entries.size(), 3u);
  for (const auto& sc : s) EXPECT_NO_THROW(apphand::validate_request(sc.entries));
}

TEST(ClosedLoop, IonityTritiumTlsAndIso2) {
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "ionity-tritium-veefil-pk"));
  EXPECT_TRUE(report.derived.supports_tls);
  EXPECT_TRUE(report.derived.supports_iso2);
  EXPECT_EQ(report.derived.chain_valid, true);
  const auto& s1 = outcome(report, 1);
  ASSERT_TRUE(s1.tls);
  EXPECT_EQ(s1.tls->matched_root, "hubject-v2g-root");
  EXPECT_EQ(s1.tls->presented_chain.size(), 2u);
  EXPECT_EQ(s1.chosen_protocol, Protocol::iso15118_2);
}

TEST(ClosedLoop, AllegoTlsAndIso2) {
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "allego-alpitronic-hyc300"));
  EXPECT_TRUE(report.derived.supports_tls);
  EXPECT_TRUE(report.derived.supports_iso2);
}

TEST(ClosedLoop, CircleKDinOnlyNoTls) {
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "circle-k-abb-hp-cp500"));
  EXPECT_FALSE(report.derived.supports_tls);
  EXPECT_FALSE(report.derived.supports_iso2);
  EXPECT_TRUE(report.derived.supports_din);
  const auto& s1 = outcome(report, 1);
  EXPECT_EQ(s1.failure, "sdp");  // silent on TLS requests
  ASSERT_TRUE(s1.tls);
  EXPECT_FALSE(s1.tls->handshake_ok);
  const auto& s2 = outcome(report, 2);
  ASSERT_TRUE(s2.handshake);
  EXPECT_EQ(s2.handshake->response_code, apphand::ResponseCode::FailedNoNegotiation);
  EXPECT_EQ(outcome(report, 4).chosen_protocol, Protocol::din70121);
}

TEST(ClosedLoop, DowngradeAbortsScenarioOne) {
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "enbw-alpitronic-hyc400"));
  const auto& s1 = outcome(report, 1);
  EXPECT_EQ(s1.failure, "sdp_downgrade");
  EXPECT_TRUE(s1.sdp.downgraded);
  EXPECT_FALSE(s1.handshake);
  EXPECT_FALSE(report.derived.supports_tls);
  EXPECT_TRUE(report.derived.supports_iso2);
  EXPECT_EQ(report.derived.preferred_protocol, Protocol::iso15118_2);
}

TEST(ClosedLoop, PreferenceIndependentOfAvailability) {
  auto p = testsupport::profile_named(testsupport::table2_profiles(), "lidl-abb-terra-60");
  p.preferred_protocol = Protocol::din70121;
  auto report = probe(p);
  EXPECT_EQ(outcome(report, 3).chosen_protocol, Protocol::din70121);
  EXPECT_EQ(outcome(report, 2).chosen_protocol, Protocol::iso15118_2);
  EXPECT_EQ(outcome(report, 2).handshake->response_code,
            apphand::ResponseCode::OkSuccessfulNegotiation);
  EXPECT_TRUE(report.derived.supports_iso2);
  EXPECT_TRUE(report.derived.supports_din);
  EXPECT_EQ(report.derived.preferred_protocol, Protocol::din70121);
}

TEST(ClosedLoop, SlacFaultGivesValidReport) {
  for (auto fault : {slac::SlacFault::no_parm_cnf, slac::SlacFault::wrong_run_id}) {
    auto p = testsupport::profile_named(testsupport::table2_profiles(), "ewe-alpitronic-hyc300");
    p.slac_fault = fault;
    auto cfg = testsupport::desk_config();
    cfg.slac.stage_timeout = Millis(100);
    auto start = Clock::now();
    auto report = probe(p, cfg);
    EXPECT_LT(Clock::now() - start, std::chrono::seconds(10));
    ASSERT_EQ(report.scenarios.size(), 4u);
    for (const auto& o : report.scenarios) {
      EXPECT_EQ(o.failure, "slac");
      EXPECT_EQ(o.slac_attempts, 2);
      EXPECT_FALSE(o.slac_matched);
    }
    EXPECT_FALSE(report.derived.supports_tls);
    EXPECT_FALSE(report.derived.supports_iso2);
    EXPECT_FALSE(report.derived.supports_din);
  }
}

TEST(ClosedLoop, ExpiredChainStillCountsAsTls) {
  auto p = testsupport::profile_named(testsupport::table2_profiles(), "ionity-abb-hp-cp500");
  std::ifstream in(testsupport::data_dir() / "pki" / "secc-chain-expired.pem");
  p.certificate_chain = std::string(std::istreambuf_iterator<char>(in), {});
  auto report = probe(p);
  EXPECT_TRUE(report.derived.supports_tls);
  EXPECT_EQ(report.derived.chain_valid, false);
  EXPECT_FALSE(outcome(report, 1).tls->chain_problems.empty());
}

TEST(ClosedLoop, ScenarioOrderDoesNotMatter) {
  auto all = testsupport::table2_profiles();
  for (const char* name : {"aral-alpitronic-hyc300", "edeka-compleo-cito-bm-500"}) {
    auto cfg = testsupport::desk_config();
    auto forward = probe(testsupport::profile_named(all, name), cfg);
    cfg.order = {4, 2, 3, 1};
    auto shuffled = probe(testsupport::profile_named(all, name), cfg);
    EXPECT_EQ(forward.derived, shuffled.derived) << name;
  }
}

TEST(ClosedLoop, DerivationIsPureAndSurvivesJson) {
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "ionity-alpitronic-hyc400"));
  auto back = station_report_from_json(to_json(report));
  EXPECT_EQ(back, report);
  EXPECT_EQ(derive_flags(back.scenarios), report.derived);
  auto reversed = back.scenarios;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(derive_flags(reversed), report.derived);
}

TEST(ClosedLoop, ReportsCarryNoTimestampsAndAreStable) {
  auto p = testsupport::profile_named(testsupport::table2_profiles(), "aral-alpitronic-hyc300");
  auto a = dump_stable(to_json(probe(p)));
  auto b = dump_stable(to_json(probe(p)));
  EXPECT_EQ(a, b);
}

TEST(ClosedLoop, CapturesWritten) {
  testsupport::TempDir dir("captures");
  auto cfg = testsupport::desk_config();
  cfg.capture_dir = dir.path();
  auto report = probe(testsupport::profile_named(testsupport::table2_profiles(),
                                                 "fastned-alpitronic-hyc300"),
                      cfg);
  ASSERT_EQ(report.captures.size(), 4u);
  for (const auto& c : report.captures) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / c));
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "fastned-alpitronic-hyc300-s1.pcap"));
}

TEST(ClosedLoop, TerminationSafetyAcrossFixtures) {
  for (const auto& p : testsupport::table2_profiles()) {
    std::vector<SimulatorRun> runs;
    std::vector<std::vector<CaptureEntry>> ev_logs;
    auto report = probe(p, testsupport::desk_config(), &runs, &ev_logs);
    EXPECT_EQ(runs.size(), 4u);
    for (const auto& log : ev_logs) EXPECT_TRUE(scan_transcript(log).empty()) << p.name;
    for (const auto& r : runs) {
      EXPECT_FALSE(r.error) << p.name << ": " << r.error.value_or("");
      EXPECT_TRUE(scan_transcript(r.log->entries()).empty()) << p.name;
      EXPECT_EQ(r.session.ignored_after_negotiation, 0);
      for (const auto& ev : r.pilot_history) EXPECT_NE(ev.cp_state, slac::CpState::C);
    }
    EXPECT_EQ(report.derived.supports_iso2, p.supports(Protocol::iso15118_2)) << p.name;
    EXPECT_EQ(report.derived.supports_tls, p.tls_enabled) << p.name;
    EXPECT_EQ(report.derived.supports_din, p.supports(Protocol::din70121)) << p.name;
    EXPECT_EQ(report.derived.preferred_protocol, p.preferred_protocol) << p.name;
  }
}

TEST(Scanner, FlagsMessagesPastNegotiation) {
  CaptureLog log;
  auto req = apphand::encode_handshake_request(scenario(2).entries);
  auto res = apphand::encode_handshake_response({apphand::ResponseCode::OkSuccessfulNegotiation, 1});
  log.record(Direction::tx, Layer::v2gtp, v2gtp::encode_v2gtp(v2gtp::kPayloadExi, req), "req");
  log.record(Direction::rx, Layer::v2gtp, v2gtp::encode_v2gtp(v2gtp::kPayloadExi, res), "res");
  EXPECT_TRUE(scan_transcript(log.entries()).empty());
  // A SessionSetupReq-sized EXI body that is not a handshake message.
  Bytes session_setup{0x80, 0x9a, 0x02, 0x00, 0x40, 0x80, 0xc1, 0x01, 0x41, 0x81, 0xc2, 0x10};
  log.record(Direction::tx, Layer::v2gtp, v2gtp::encode_v2gtp(v2gtp::kPayloadExi, session_setup),
             "next");
  EXPECT_EQ(scan_transcript(log.entries()).size(), 1u);
}

TEST(Scanner, FlagsStateC) {
  std::vector<CaptureEntry> entries(1);
  entries[0].layer = Layer::control_pilot;
  entries[0].direction = Direction::event;
  entries[0].summary = "cp_state=C duty=5.0%";
  EXPECT_EQ(scan_transcript(entries).size(), 1u);
  slac::ControlPilot cp;
  EXPECT_THROW(cp.apply({slac::CpState::C, 5.0}), slac::ControlPilotError);
}

TEST(Scanner, FlagsSecondRequestAndOtherPayloads) {
  CaptureLog log;
  auto req = apphand::encode_handshake_request(scenario(4).entries);
  log.record(Direction::tx, Layer::v2gtp, v2gtp::encode_v2gtp(v2gtp::kPayloadExi, req), "req");
  log.record(Direction::tx, Layer::v2gtp, v2gtp::encode_v2gtp(v2gtp::kPayloadExi, req), "req");
  log.record(Direction::tx, Layer::v2gtp, v2gtp::encode_v2gtp(0x8002, req), "other");
  EXPECT_EQ(scan_transcript(log.entries()).size(), 2u);
}

// ---------------------------------------------------------------------------
// Assumptions

StationReport synthetic(std::string id, std::string cpo, std::string mfr, bool tls, bool iso2,
                        bool din = true) {
  StationReport r;
  r.station.id = std::move(id);
  r.station.cluster = {std::move(cpo), std::move(mfr)};
  r.derived.supports_tls = tls;
  r.derived.supports_iso2 = iso2;
  r.derived.supports_din = din;
  r.derived.preferred_protocol = iso2 ? Protocol::iso15118_2 : Protocol::din70121;
  return r;
}

const ConsistencyFinding& finding(const std::vector<ConsistencyFinding>& fs, Dimension d,
                                  const market::ClusterKey& k) {
  for (const auto& f : fs) {
    if (f.dimension == d && f.cluster == k) return f;
  }
  throw std::runtime_error("no finding");
}

TEST(Assumptions, EightIdenticalThenOneFlipped) {
  std::vector<StationReport> reports;
  for (int i = 0; i < 8; ++i) {
    reports.push_back(synthetic("enbw-" + std::to_string(i), "enbw", "alpitronic", false, true));
  }
  auto fs = validate_assumptions(reports);
  const auto& ok = finding(fs, Dimension::A2_cpo_configuration, {"enbw", "alpitronic"});
  EXPECT_TRUE(ok.consistent);
  EXPECT_EQ(ok.reports, 8u);

  reports[5].derived.supports_tls = true;
  fs = validate_assumptions(reports);
  const auto& bad = finding(fs, Dimension::A2_cpo_configuration, {"enbw", "alpitronic"});
  EXPECT_FALSE(bad.consistent);
  ASSERT_EQ(bad.witnesses.size(), 1u);
  EXPECT_EQ(bad.witnesses[0].first, "enbw-0");
  EXPECT_EQ(bad.witnesses[0].second, "enbw-5");
  EXPECT_EQ(bad.witnesses[0].differing, std::vector<std::string>{"supports_tls"});
}

TEST(Assumptions, TwoReportsDiffering) {
  auto fs = validate_assumptions({synthetic("a", "x", "m", true, true), synthetic("b", "x", "m", false, true)});
  const auto& f = finding(fs, Dimension::A2_cpo_configuration, {"x", "m"});
  EXPECT_FALSE(f.consistent);
  EXPECT_EQ(f.witnesses.size(), 1u);
}

TEST(Assumptions, CompleoCapabilityAcrossOperators) {
  auto fs = validate_assumptions({synthetic("aral-compleo", "aral", "compleo", false, false),
                                  synthetic("elli-compleo", "elli", "compleo", false, true),
                                  synthetic("edeka-compleo", "edeka", "compleo", false, false)});
  const auto& a1 = finding(fs, Dimension::A1_manufacturer_capability, {"*", "compleo"});
  EXPECT_FALSE(a1.consistent);
  ASSERT_EQ(a1.witnesses.size(), 1u);
  EXPECT_EQ(a1.witnesses[0].first, "aral-compleo");
  EXPECT_EQ(a1.witnesses[0].second, "elli-compleo");
  EXPECT_EQ(a1.witnesses[0].differing, std::vector<std::string>{"ISO15118_2"});
}

TEST(Assumptions, InsufficientSamples) {
  auto fs = validate_assumptions({synthetic("a", "x", "m", false, true)});
  ASSERT_EQ(fs.size(), 2u);
  for (const auto& f : fs) {
    EXPECT_TRUE(f.insufficient_sample);
    EXPECT_TRUE(f.consistent);
  }
  EXPECT_TRUE(validate_assumptions({}).empty());
}

TEST(Assumptions, A1IgnoresTlsActivation) {
  auto fs = validate_assumptions({synthetic("a", "aral", "alpitronic", true, true),
                                  synthetic("b", "enbw", "alpitronic", false, true)});
  EXPECT_TRUE(finding(fs, Dimension::A1_manufacturer_capability, {"*", "alpitronic"}).consistent);
}

}  // namespace
