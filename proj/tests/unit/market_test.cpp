#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "chargescope/artifact.hpp"
#include "chargescope/market.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "paths.hpp"
#include "registry_fixture.hpp"

using namespace chargescope;
using namespace chargescope::market;
using dataset::StationRecord;

namespace {

const dataset::AnalysisSet& table1_set() {
  static const dataset::AnalysisSet set = [] {
    std::istringstream in(testsupport::paper_marginals_registry_csv());
    auto parsed = dataset::parse_registry(in, dataset::RegistryFormat::csv, {.current_year = 2025});
    auto aliases = testsupport::data_dir() / "aliases";
    auto cpo = dataset::AliasMap::load_csv_file(aliases / "cpo.csv", dataset::AliasScope::cpo);
    auto mfr = dataset::AliasMap::load_csv_file(aliases / "manufacturer.csv",
                                                dataset::AliasScope::manufacturer);
    return dataset::build_analysis_set(dataset::normalize_labels(parsed.records, cpo, mfr), "DE");
  }();
  return set;
}

StationRecord station(std::string id, std::string cpo, std::string mfr, std::uint32_t points,
                      std::optional<int> year = std::nullopt) {
  StationRecord s;
  s.source_id = std::move(id);
  s.country = "DE";
  s.cpo = std::move(cpo);
  s.manufacturer = std::move(mfr);
  s.charge_point_count = points;
  s.install_year = year;
  return s;
}

dataset::AnalysisSet set_of(std::vector<StationRecord> records) {
  dataset::AnalysisSet set;
  set.country = "DE";
  set.records = std::move(records);
  return set;
}

const ClusterStats& find(const std::vector<ClusterStats>& cs, const ClusterKey& k) {
  for (const auto& c : cs) {
    if (c.key == k) return c;
  }
  throw std::runtime_error("missing cluster " + to_string(k));
}

TEST(Clusters, Table1Marginals) {
  auto cs = build_clusters(table1_set());
  check_cluster_invariants(cs);
  const auto& enbw = find(cs, {"enbw", "alpitronic"});
  EXPECT_NEAR(enbw.share_within_cpo, 0.961, 0.0005);
  EXPECT_NEAR(static_cast<double>(enbw.cpo_point_count) / static_cast<double>(enbw.total_points),
              0.185, 0.0005);
  EXPECT_EQ(cs.front().key, (ClusterKey{"enbw", "alpitronic"}));
  EXPECT_NEAR(find(cs, {"ionity", "tritium"}).share_within_cpo, 0.483, 0.0005);
}

TEST(Clusters, Table1Counts) {
  const auto& set = table1_set();
  EXPECT_EQ(set.retained_points(), 40949u);
  EXPECT_EQ(set.dropped_no_manufacturer_points, 3364u);
  EXPECT_EQ(set.total_input_points, 114078u);
  EXPECT_EQ(set.total_input_points - set.dropped_wrong_country_points - set.dropped_non_ccs_points,
            44313u);
}

TEST(Clusters, Singleton) {
  auto cs = build_clusters(set_of({station("a", "x", "y", 1)}));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].share_of_total, 1.0);
  EXPECT_EQ(cs[0].share_within_cpo, 1.0);
}

TEST(Clusters, SymmetricCpos) {
  auto cs = build_clusters(set_of({station("a", "p", "m", 3), station("b", "q", "m", 3)}));
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(cs[0].key.cpo, "p");
  EXPECT_EQ(cs[0].share_of_total, 0.5);
  EXPECT_EQ(cs[1].share_of_total, 0.5);
}

TEST(Clusters, EmptySet) { EXPECT_TRUE(build_clusters(set_of({})).empty()); }

TEST(Clusters, SortedAndConserved) {
  testsupport::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StationRecord> recs;
    int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      recs.push_back(station("s" + std::to_string(i), "c" + std::to_string(rng() % 5),
                             "m" + std::to_string(rng() % 4), 1 + rng() % 9));
    }
    auto cs = build_clusters(set_of(recs));
    EXPECT_NO_THROW(check_cluster_invariants(cs));
    for (std::size_t i = 1; i < cs.size(); ++i) {
      EXPECT_TRUE(cs[i - 1].point_count > cs[i].point_count ||
                  (cs[i - 1].point_count == cs[i].point_count && cs[i - 1].key < cs[i].key));
    }
  }
}

TEST(Shares, Table1Manufacturers) {
  auto m = manufacturer_shares(table1_set());
  EXPECT_NEAR(m.at("alpitronic"), 0.66, 0.005);
  EXPECT_NEAR(m.at("abb"), 0.10, 0.005);
  EXPECT_NEAR(m.at("tesla"), 0.092, 0.0005);
  double sum = 0;
  for (const auto& [k, v] : m) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Shares, Trivial) {
  auto one = manufacturer_shares(set_of({station("a", "x", "m", 4)}));
  EXPECT_EQ(one, (std::map<std::string, double>{{"m", 1.0}}));
  auto three = manufacturer_shares(
      set_of({station("a", "x", "p", 2), station("b", "x", "q", 1), station("c", "y", "r", 1)}));
  EXPECT_EQ(three.at("p"), 0.5);
  EXPECT_EQ(three.at("q"), 0.25);
  EXPECT_EQ(three.at("r"), 0.25);
}

TEST(Plan, Table1BudgetOne) {
  const auto& set = table1_set();
  auto cs = build_clusters(set);
  auto plan = plan_sample(cs, 1, 2, set.records);
  ASSERT_EQ(plan.selected.size(), 1u);
  EXPECT_EQ(plan.selected[0].key, (ClusterKey{"enbw", "alpitronic"}));
  EXPECT_NEAR(plan.planned_coverage, 0.185 * 0.961, 0.001);
  EXPECT_EQ(plan.selected[0].stations.size(), 2u);
}

TEST(Plan, ExhaustiveBudget) {
  auto cs = build_clusters(
      set_of({station("a", "p", "m", 3), station("b", "q", "m", 2), station("c", "q", "n", 1)}));
  auto plan = plan_sample(cs, 10);
  EXPECT_EQ(plan.selected.size(), 3u);
  EXPECT_NEAR(plan.planned_coverage, 1.0, 1e-12);
}

TEST(Plan, Table2ClusterList) {
  auto all = clusters_from_json(read_json_file(testsupport::data_dir() / "table2_clusters.json"));
  auto ref = read_json_file(testsupport::data_dir() / "table2_reference.json");
  std::set<ClusterKey> tested;
  for (const auto& r : ref["rows"]) tested.insert({r["cpo"].get<std::string>(), r["manufacturer"].get<std::string>()});
  EXPECT_EQ(tested.size(), 17u);
  std::vector<ClusterStats> table2;
  for (const auto& c : all) {
    if (tested.count(c.key)) table2.push_back(c);
  }
  auto plan = plan_sample(table2, 19);
  EXPECT_EQ(plan.selected.size(), 17u);
  EXPECT_NEAR(plan.planned_coverage, 0.519, 0.0005);
}

TEST(Plan, ZeroBudgetRejected) {
  std::vector<ClusterStats> none;
  EXPECT_THROW(plan_sample(none, 0), std::invalid_argument);
}

TEST(Plan, TiesAreLexicographic) {
  auto cs = clusters_from_counts({{{"b", "x"}, 5}, {{"a", "y"}, 5}, {{"a", "x"}, 5}});
  auto plan = plan_sample(cs, 2);
  EXPECT_EQ(plan.selected[0].key, (ClusterKey{"a", "x"}));
  EXPECT_EQ(plan.selected[1].key, (ClusterKey{"a", "y"}));
}

TEST(Plan, GreedyMatchesBruteForce) {
  testsupport::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<ClusterKey, std::uint64_t> counts;
    std::size_t n = 1 + rng() % 15;
    while (counts.size() < n) {
      counts[{"c" + std::to_string(rng() % 6), "m" + std::to_string(rng() % 8)}] = 1 + rng() % 50;
    }
    auto cs = clusters_from_counts(counts);
    std::vector<std::uint64_t> pts;
    std::uint64_t total = 0;
    for (const auto& c : cs) {
      pts.push_back(c.point_count);
      total += c.point_count;
    }
    for (std::uint32_t budget = 1; budget <= 5; ++budget) {
      auto plan = plan_sample(cs, budget);
      std::uint64_t got = 0;
      for (const auto& p : plan.selected) got += p.point_count;
      EXPECT_EQ(got, testsupport::best_subset(pts, budget));
      EXPECT_NEAR(plan.planned_coverage, static_cast<double>(got) / static_cast<double>(total),
                  1e-12);
    }
  }
}

TEST(Plan, CoverageMonotoneInBudget) {
  auto cs = build_clusters(table1_set());
  double prev = 0;
  for (std::uint32_t b = 1; b <= cs.size() + 2; ++b) {
    double cov = plan_sample(cs, b).planned_coverage;
    EXPECT_GE(cov, prev);
    prev = cov;
  }
  EXPECT_NEAR(prev, 1.0, 1e-9);
}

TEST(Representatives, SpreadAcrossYears) {
  std::vector<StationRecord> s{station("d", "x", "y", 1, 2021), station("a", "x", "y", 1, 2019),
                               station("b", "x", "y", 1, 2019), station("c", "x", "y", 1, 2025),
                               station("e", "x", "y", 1, 2023), station("f", "x", "y", 1)};
  EXPECT_EQ(pick_representatives(s, 2), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(pick_representatives(s, 3), (std::vector<std::string>{"a", "c", "d"}));
  EXPECT_EQ(pick_representatives(s, 10).size(), 6u);
  EXPECT_EQ(pick_representatives(s, 10).back(), "f");
}

TEST(Representatives, UndatedBySourceId) {
  std::vector<StationRecord> s{station("z", "x", "y", 1), station("m", "x", "y", 1)};
  EXPECT_EQ(pick_representatives(s, 1), (std::vector<std::string>{"m"}));
}

TEST(ClusterJson, RoundTripAndVersion) {
  auto cs = build_clusters(table1_set());
  auto j = to_json(cs);
  EXPECT_EQ(clusters_from_json(j), cs);
  j["format_version"] = 2;
  EXPECT_THROW(clusters_from_json(j), FormatVersionError);
}

TEST(ClusterJson, BundledTable2Fixture) {
  auto cs = clusters_from_json(read_json_file(testsupport::data_dir() / "table2_clusters.json"));
  EXPECT_NO_THROW(check_cluster_invariants(cs));
  EXPECT_EQ(cs.front().total_points, 100000u);
}

TEST(PlanJson, RoundTrip) {
  const auto& set = table1_set();
  auto plan = plan_sample(build_clusters(set), 4, 3, set.records);
  EXPECT_EQ(sample_plan_from_json(to_json(plan)), plan);
  EXPECT_EQ(to_json(plan)["selected"][0]["stations"].size(), 3u);
}

}  // namespace
