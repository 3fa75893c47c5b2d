#include "chargescope/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "chargescope/artifact.hpp"

namespace chargescope::extrapolation {

std::string to_string(ConflictPolicy p) { return p == ConflictPolicy::block ? "block" : "majority"; }

ConflictPolicy conflict_policy_from_string(const std::string& s) {
  if (s == "block") return ConflictPolicy::block;
  if (s == "majority") return ConflictPolicy::majority;
  throw std::invalid_argument("unknown conflict policy: " + s);
}

std::string Fraction::percent() const {
  if (den == 0) return "0.0";
  // round(num * 1000 / den) half-up, in tenths of a percent
  std::uint64_t tenths = (num * 2000 + den) / (2 * den);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

namespace {

Verdict verdict_of(const orchestrator::StationReport& r) {
  return {r.derived.supports_tls, r.derived.supports_iso2, r.derived.supports_din};
}

}  // namespace

std::vector<ClusterResult> extrapolate(const std::vector<market::ClusterStats>& clusters,
                                       const std::vector<orchestrator::StationReport>& reports,
                                       ConflictPolicy policy) {
  std::map<market::ClusterKey, std::vector<const orchestrator::StationReport*>> by_cluster;
  std::set<market::ClusterKey> known;
  for (const auto& c : clusters) known.insert(c.key);
  for (const auto& r : reports) {
    if (!known.count(r.station.cluster)) {
      throw UnknownClusterError("report " + r.station.id + " names unknown cluster " +
                                market::to_string(r.station.cluster));
    }
    by_cluster[r.station.cluster].push_back(&r);
  }

  std::map<market::ClusterKey, orchestrator::ConsistencyFinding> a2;
  for (const auto& f : orchestrator::validate_assumptions(reports)) {
    if (f.dimension == orchestrator::Dimension::A2_cpo_configuration) a2[f.cluster] = f;
  }

  std::vector<ClusterResult> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    ClusterResult res;
    res.stats = c;
    auto it = by_cluster.find(c.key);
    if (it != by_cluster.end()) {
      auto list = it->second;
      std::stable_sort(list.begin(), list.end(),
                       [](auto* a, auto* b) { return a->station.id < b->station.id; });
      for (auto* r : list) {
        res.tested.push_back({r->station.id, r->station.model, r->station.year_label, verdict_of(*r)});
      }
      res.evidence_count = list.size();
      const auto& finding = a2.at(c.key);
      res.conflict = !finding.consistent;
      res.conflict_witnesses = finding.witnesses;
      if (!res.conflict) {
        res.verdict = res.tested.front().flags;
      } else if (policy == ConflictPolicy::majority) {
        // Majority over the verdict triple; the earliest station id wins ties.
        std::vector<std::pair<Verdict, std::size_t>> counts;
        for (const auto& t : res.tested) {
          auto v = std::find_if(counts.begin(), counts.end(),
                                [&](const auto& p) { return p.first == t.flags; });
          if (v == counts.end()) {
            counts.emplace_back(t.flags, 1);
          } else {
            ++v->second;
          }
        }
        auto best = counts.begin();
        for (auto v = counts.begin(); v != counts.end(); ++v) {
          if (v->second > best->second) best = v;
        }
        res.verdict = best->first;
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

NationalSummary aggregate(const std::vector<ClusterResult>& results) {
  NationalSummary s;
  std::set<std::string> cpos;
  for (const auto& r : results) {
    if (s.total_points == 0) s.total_points = r.stats.total_points;
    if (r.stats.total_points != s.total_points) {
      throw std::invalid_argument("cluster results come from different analysis sets");
    }
    s.per_cluster_table.push_back(r);
    if (!r.verdict) continue;
    s.covered_points += r.stats.point_count;
    if (r.verdict->supports_tls) s.tls_points += r.stats.point_count;
    if (r.verdict->supports_iso2) s.iso2_points += r.stats.point_count;
    if (r.verdict->supports_din) s.din_points += r.stats.point_count;
    if (cpos.insert(r.stats.key.cpo).second) s.covered_cpo_points += r.stats.cpo_point_count;
  }
  return s;
}

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

// Per-mille of a share, rounded half-up, as "x.y" percent.
std::string pct(std::uint64_t num, std::uint64_t den) { return Fraction{num, den}.percent(); }

}  // namespace

std::vector<DiscrepancyNote> compare_with_reference(const NationalSummary& summary,
                                                    const nlohmann::json& reference) {
  std::vector<DiscrepancyNote> notes;
  const auto& printed = reference.at("summary");
  auto compare = [&](const std::string& metric, const Fraction& f) {
    if (!printed.contains(metric)) return;
    double p = printed[metric].get<double>();
    auto computed = f.percent();
    double delta = std::stod(computed) - p;
    DiscrepancyNote n;
    n.metric = metric;
    n.computed = computed;
    n.printed = fmt1(p);
    if (std::fabs(delta) <= 0.1 + 1e-9) {
      n.kind = "within_rounding";
    } else {
      n.kind = "data_discrepancy";
      n.detail = "recomputed from per-cluster counts; differs from the printed value by " +
                 fmt1(delta) + " points";
    }
    notes.push_back(std::move(n));
  };
  compare("cpo_pct_of_all", summary.covered_cpo_share());
  compare("covered_pct_of_all", summary.covered_share());
  compare("tls_pct_of_all", summary.tls_share_of_all());
  compare("tls_pct_of_covered", summary.tls_share_of_covered());
  compare("iso2_pct_of_all", summary.iso2_share_of_all());
  compare("iso2_pct_of_covered", summary.iso2_share_of_covered());

  if (reference.contains("cross_table")) {
    for (const auto& x : reference["cross_table"]) {
      market::ClusterKey key{x.at("cluster").at("cpo").get<std::string>(),
                             x.at("cluster").at("manufacturer").get<std::string>()};
      DiscrepancyNote n;
      n.kind = "source_conflict";
      n.metric = market::to_string(key) + " " + x.at("field").get<std::string>();
      for (const auto& r : summary.per_cluster_table) {
        if (r.stats.key == key) n.computed = pct(r.stats.point_count, r.stats.cpo_point_count);
      }
      n.printed = fmt1(x.at("table2").get<double>());
      n.detail = "market table lists " + fmt1(x.at("table1").get<double>()) +
                 ", results table lists " + fmt1(x.at("table2").get<double>()) +
                 "; both kept as given";
      notes.push_back(std::move(n));
    }
  }
  return notes;
}

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  if (s == "markdown" || s == "md" || s == "markdown-table") return Format::markdown;
  throw std::invalid_argument("unknown output format: " + s);
}

namespace {

struct Row {
  std::string cpo, cpo_pct, oem, oem_pct, cluster_pct, model, year, iso, tls;
};

std::string mark(bool v) { return v ? "✓" : "✗"; }

// Tested clusters in table order: operator size, then cluster size.
std::vector<const ClusterResult*> table_order(const NationalSummary& s) {
  std::vector<const ClusterResult*> rows;
  for (const auto& r : s.per_cluster_table) {
    if (!r.tested.empty()) rows.push_back(&r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
    const auto& x = a->stats;
    const auto& y = b->stats;
    if (x.cpo_point_count != y.cpo_point_count) return x.cpo_point_count > y.cpo_point_count;
    if (x.key.cpo != y.key.cpo) return x.key.cpo < y.key.cpo;
    if (x.point_count != y.point_count) return x.point_count > y.point_count;
    return x.key < y.key;
  });
  return rows;
}

std::vector<Row> table_rows(const NationalSummary& s) {
  std::vector<Row> rows;
  std::string last_cpo;
  for (const auto* c : table_order(s)) {
    bool first_in_cluster = true;
    for (const auto& t : c->tested) {
      Row row;
      if (c->stats.key.cpo != last_cpo) {
        row.cpo = c->stats.key.cpo;
        row.cpo_pct = pct(c->stats.cpo_point_count, c->stats.total_points);
        last_cpo = c->stats.key.cpo;
      }
      if (first_in_cluster) {
        row.oem = c->stats.key.manufacturer;
        row.oem_pct = pct(c->stats.point_count, c->stats.cpo_point_count);
        row.cluster_pct = pct(c->stats.point_count, c->stats.total_points);
        first_in_cluster = false;
      }
      row.model = t.model;
      row.year = t.year_label;
      row.iso = mark(t.flags.supports_iso2);
      row.tls = mark(t.flags.supports_tls);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_markdown(const NationalSummary& s) {
  std::ostringstream out;
  out << "| CPO | CPO % | OEM | OEM % | Cluster % | Model | Year | ISO 15118-2 | TLS |\n";
  out << "|---|---:|---|---:|---:|---|---|:---:|:---:|\n";
  auto rows = table_rows(s);
  for (const auto& r : rows) {
    out << "| " << r.cpo << " | " << r.cpo_pct << " | " << r.oem << " | " << r.oem_pct << " | "
        << r.cluster_pct << " | " << r.model << " | " << r.year << " | " << r.iso << " | " << r.tls
        << " |\n";
  }
  if (rows.empty()) return out.str();
  out << "| **% Of All** | " << s.covered_cpo_share().percent() << " | | | "
      << s.covered_share().percent() << " | | | " << s.iso2_share_of_all().percent() << " | "
      << s.tls_share_of_all().percent() << " |\n";
  out << "| **% Of Clusters** | | | | 100.0 | | | " << s.iso2_share_of_covered().percent() << " | "
      << s.tls_share_of_covered().percent() << " |\n";
  std::vector<std::string> blocked;
  for (const auto& c : s.per_cluster_table) {
    if (c.conflict && !c.verdict) blocked.push_back(market::to_string(c.stats.key));
  }
  if (!blocked.empty() || !s.notes.empty()) out << "\n";
  for (const auto& b : blocked) out << "- conflicting reports, no verdict: " << b << "\n";
  for (const auto& n : s.notes) {
    if (n.kind == "within_rounding") continue;
    out << "- " << n.kind << ": " << n.metric << " computed " << n.computed << ", printed "
        << n.printed << (n.detail.empty() ? "" : " (" + n.detail + ")") << "\n";
  }
  return out.str();
}

std::string render_csv(const NationalSummary& s) {
  std::ostringstream out;
  out << "cpo,cpo_pct,oem,oem_pct,cluster_pct,model,year,iso15118_2,tls\n";
  for (const auto& r : table_rows(s)) {
    out << csv_field(r.cpo) << "," << r.cpo_pct << "," << csv_field(r.oem) << "," << r.oem_pct
        << "," << r.cluster_pct << "," << csv_field(r.model) << "," << csv_field(r.year) << ","
        << (r.iso == "✓" ? 1 : 0) << "," << (r.tls == "✓" ? 1 : 0) << "\n";
  }
  out << "% of all," << s.covered_cpo_share().percent() << ",,," << s.covered_share().percent()
      << ",,," << s.iso2_share_of_all().percent() << "," << s.tls_share_of_all().percent() << "\n";
  out << "% of clusters,,,,100.0,,," << s.iso2_share_of_covered().percent() << ","
      << s.tls_share_of_covered().percent() << "\n";
  return out.str();
}

using nlohmann::json;

json verdict_json(const Verdict& v) {
  return {{"supports_tls", v.supports_tls},
          {"supports_iso2", v.supports_iso2},
          {"supports_din", v.supports_din}};
}

Verdict verdict_from(const json& j) {
  return {j.at("supports_tls").get<bool>(), j.at("supports_iso2").get<bool>(),
          j.at("supports_din").get<bool>()};
}

json fraction_json(const Fraction& f) {
  return {{"num", f.num}, {"den", f.den}, {"percent", f.percent()}};
}

}  // namespace

std::string render_report(const NationalSummary& summary, Format format) {
  switch (format) {
    case Format::json: return dump_stable(to_json(summary));
    case Format::csv: return render_csv(summary);
    case Format::markdown: return render_markdown(summary);
  }
  return {};
}

nlohmann::json to_json(const NationalSummary& s) {
  auto j = artifact_header("national_summary");
  j["total_points"] = s.total_points;
  j["covered_points"] = s.covered_points;
  j["covered_cpo_points"] = s.covered_cpo_points;
  j["tls_points"] = s.tls_points;
  j["iso2_points"] = s.iso2_points;
  j["din_points"] = s.din_points;
  j["shares"] = {{"covered_share", fraction_json(s.covered_share())},
                 {"tls_share_of_all", fraction_json(s.tls_share_of_all())},
                 {"tls_share_of_covered", fraction_json(s.tls_share_of_covered())},
                 {"iso2_share_of_all", fraction_json(s.iso2_share_of_all())},
                 {"iso2_share_of_covered", fraction_json(s.iso2_share_of_covered())},
                 {"covered_cpo_share", fraction_json(s.covered_cpo_share())}};
  json clusters = json::array();
  for (const auto& c : s.per_cluster_table) {
    json tested = json::array();
    for (const auto& t : c.tested) {
      tested.push_back({{"id", t.id},
                        {"model", t.model},
                        {"year", t.year_label},
                        {"flags", verdict_json(t.flags)}});
    }
    json witnesses = json::array();
    for (const auto& w : c.conflict_witnesses) {
      witnesses.push_back({{"first", w.first}, {"second", w.second}, {"differing", w.differing}});
    }
    clusters.push_back({{"cpo", c.stats.key.cpo},
                        {"manufacturer", c.stats.key.manufacturer},
                        {"point_count", c.stats.point_count},
                        {"cpo_point_count", c.stats.cpo_point_count},
                        {"total_points", c.stats.total_points},
                        {"share_of_total", c.stats.share_of_total},
                        {"share_within_cpo", c.stats.share_within_cpo},
                        {"tested", tested},
                        {"evidence_count", c.evidence_count},
                        {"verdict", c.verdict ? verdict_json(*c.verdict) : json()},
                        {"conflict", c.conflict},
                        {"conflict_witnesses", witnesses}});
  }
  j["clusters"] = clusters;
  json notes = json::array();
  for (const auto& n : s.notes) {
    notes.push_back({{"kind", n.kind},
                     {"metric", n.metric},
                     {"computed", n.computed},
                     {"printed", n.printed},
                     {"detail", n.detail}});
  }
  j["notes"] = notes;
  return j;
}

NationalSummary summary_from_json(const nlohmann::json& j) {
  check_artifact(j, "national_summary");
  try {
    NationalSummary s;
    s.total_points = j.at("total_points").get<std::uint64_t>();
    s.covered_points = j.at("covered_points").get<std::uint64_t>();
    s.covered_cpo_points = j.at("covered_cpo_points").get<std::uint64_t>();
    s.tls_points = j.at("tls_points").get<std::uint64_t>();
    s.iso2_points = j.at("iso2_points").get<std::uint64_t>();
    s.din_points = j.at("din_points").get<std::uint64_t>();
    for (const auto& c : j.at("clusters")) {
      ClusterResult r;
      r.stats.key = {c.at("cpo").get<std::string>(), c.at("manufacturer").get<std::string>()};
      r.stats.point_count = c.at("point_count").get<std::uint64_t>();
      r.stats.cpo_point_count = c.at("cpo_point_count").get<std::uint64_t>();
      r.stats.total_points = c.at("total_points").get<std::uint64_t>();
      r.stats.share_of_total = c.at("share_of_total").get<double>();
      r.stats.share_within_cpo = c.at("share_within_cpo").get<double>();
      for (const auto& t : c.at("tested")) {
        r.tested.push_back({t.at("id").get<std::string>(), t.at("model").get<std::string>(),
                            t.at("year").get<std::string>(), verdict_from(t.at("flags"))});
      }
      r.evidence_count = c.at("evidence_count").get<std::size_t>();
      if (!c.at("verdict").is_null()) r.verdict = verdict_from(c["verdict"]);
      r.conflict = c.at("conflict").get<bool>();
      for (const auto& w : c.at("conflict_witnesses")) {
        r.conflict_witnesses.push_back({w.at("first").get<std::string>(),
                                        w.at("second").get<std::string>(),
                                        w.at("differing").get<std::vector<std::string>>()});
      }
      s.per_cluster_table.push_back(std::move(r));
    }
    for (const auto& n : j.at("notes")) {
      s.notes.push_back({n.at("kind").get<std::string>(), n.at("metric").get<std::string>(),
                         n.at("computed").get<std::string>(), n.at("printed").get<std::string>(),
                         n.at("detail").get<std::string>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("national summary: ") + e.what());
  }
}

}  // namespace chargescope::extrapolation
