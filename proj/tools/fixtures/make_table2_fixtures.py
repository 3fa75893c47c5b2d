#!/usr/bin/env python3
"""Writes the bundled Table 2 fixtures under data/.

table2.json            one EVSE profile per tested model row
table2_clusters.json   cluster point counts on a 100000-point basis
table2_reference.json  the printed table values, kept verbatim
"""
import json
import pathlib

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"

# cpo, cpo label, cpo %, oem, oem label, oem %, cluster %, model, year, iso, tls
ROWS = [
    ("enbw", "EnBW", 18.5, "alpitronic", "Alpitronic", 95.9, 17.7, "HYC400", "2023", True, False),
    ("enbw", "EnBW", 18.5, "alpitronic", "Alpitronic", 95.9, 17.7, "HYC300", "2019, 2025", True, False),
    ("enbw", "EnBW", 18.5, "alpitronic", "Alpitronic", 95.9, 17.7, "HYC200", "2024", True, False),
    ("enbw", "EnBW", 18.5, "alpitronic", "Alpitronic", 95.9, 17.7, "HYC150", "2021, 2023", True, False),
    ("aral", "Aral", 7.1, "alpitronic", "Alpitronic", 92.8, 6.6, "HYC300", "2021, 2023", True, True),
    ("aral", "Aral", 7.1, "compleo", "Compleo", 0.1, 0.0, "Cito BM 500", "2022", False, False),
    ("ewe", "EWE", 4.9, "alpitronic", "Alpitronic", 99.3, 4.9, "HYC300", "2021, 2022", True, False),
    ("allego", "allego", 4.5, "alpitronic", "Alpitronic", 95.2, 4.3, "HYC300", "2022", True, True),
    ("pfalzwerke", "pfalzwerke", 4.1, "alpitronic", "Alpitronic", 82.9, 3.4, "HYC150", "2021", True, False),
    ("ionity", "IONITY", 3.3, "tritium", "Tritium", 48.3, 1.6, "Veefil PK", "2019", True, True),
    ("ionity", "IONITY", 3.3, "abb", "ABB", 32.9, 1.1, "HP CP500", "2024", True, True),
    ("ionity", "IONITY", 3.3, "alpitronic", "Alpitronic", 18.8, 0.6, "HYC400", "2023", True, True),
    ("lidl", "Lidl", 2.4, "abb", "ABB", 79.2, 1.9, "Terra 60", "2021", True, False),
    ("elli", "Elli", 2.3, "compleo", "Compleo", 95.7, 2.2, "Cito BM 500", "2022", True, False),
    ("mer", "Mer", 2.0, "alpitronic", "Alpitronic", 90.8, 1.8, "HYC150", "2021", True, False),
    ("aldi", "Aldi", 2.0, "alpitronic", "Alpitronic", 98.8, 2.0, "HYC150", "2021", True, False),
    ("kaufland", "Kaufland", 1.7, "abb", "ABB", 92.4, 1.6, "Terra 54", "2022", True, False),
    ("edeka", "Edeka", 1.1, "compleo", "Compleo", 84.1, 0.9, "Cito BM 500", "?", False, False),
    ("fastned", "fastned", 0.8, "alpitronic", "Alpitronic", 100.0, 0.8, "HYC300", "2021", True, False),
    ("circle k", "Circle K", 0.7, "abb", "ABB", 65.0, 0.5, "HP CP500", "2021", False, False),
]

# TLS-less stations either answer a TLS request with a plaintext endpoint or
# ignore it; both variants occur in the field.
SILENT = {("edeka", "Cito BM 500"), ("circle k", "HP CP500"), ("mer", "HYC150")}

BASIS = 100_000
TESLA = 9_200
# Aral/Compleo prints as 0.0; its points follow from CPO % x OEM %.
ARAL_COMPLEO = 7


def slug(s):
    return "".join(c if c.isalnum() else "-" for c in s.lower()).strip("-")


def profiles():
    out = []
    for cpo, _, _, oem, _, _, _, model, year, iso, tls in ROWS:
        first = year.split(",")[0].strip()
        p = {
            "name": f"{slug(cpo)}-{slug(oem)}-{slug(model)}",
            "cpo": cpo,
            "manufacturer": oem,
            "model": model,
            "year": int(first) if first.isdigit() else None,
            "year_label": year,
            "protocols": ["DIN70121", "ISO15118_2"] if iso else ["DIN70121"],
            "preferred": "ISO15118_2" if iso else "DIN70121",
            "tls": tls,
            "sdp_policy": "answer_tls" if tls
            else ("silent" if (cpo, model) in SILENT else "answer_plaintext_downgrade"),
            "chain_path": "pki/secc-chain.pem" if tls else None,
            "slac_fault": "none",
        }
        out.append(p)
    return out


def clusters():
    counts = {}
    cpo_points = {}
    for cpo, _, cpo_pct, oem, _, _, cl_pct, *_ in ROWS:
        n = ARAL_COMPLEO if (cpo, oem) == ("aral", "compleo") else round(cl_pct * 1000)
        counts[(cpo, oem)] = n
        cpo_points[cpo] = round(cpo_pct * 1000)
    for cpo, total in cpo_points.items():
        rest = total - sum(n for (c, _), n in counts.items() if c == cpo)
        if rest > 0:
            counts[(cpo, "other")] = rest
    counts[("tesla", "tesla")] = TESLA
    counts[("other", "other")] = BASIS - sum(counts.values())
    items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {
        "format_version": 1,
        "kind": "clusters",
        "clusters": [
            {"cpo": c, "manufacturer": m, "point_count": n,
             "share_of_total": n / BASIS,
             "share_within_cpo": n / sum(v for (cc, _), v in counts.items() if cc == c)}
            for (c, m), n in items
        ],
    }


def reference():
    rows = []
    for cpo, cpo_l, cpo_pct, oem, oem_l, oem_pct, cl_pct, model, year, iso, tls in ROWS:
        rows.append({"cpo": cpo, "cpo_label": cpo_l, "cpo_pct": cpo_pct,
                     "manufacturer": oem, "manufacturer_label": oem_l, "oem_pct": oem_pct,
                     "cluster_pct": cl_pct, "model": model, "year": year,
                     "iso15118_2": iso, "tls": tls})
    return {
        "format_version": 1,
        "kind": "table2_reference",
        "rows": rows,
        "summary": {
            "cpo_pct_of_all": 55.4,
            "covered_pct_of_all": 51.9,
            "iso2_pct_of_all": 48.7,
            "tls_pct_of_all": 14.2,
            "iso2_pct_of_covered": 93.8,
            "tls_pct_of_covered": 27.4,
        },
        "cross_table": [
            {"cluster": {"cpo": "enbw", "manufacturer": "alpitronic"},
             "field": "oem_pct", "table1": 96.1, "table2": 95.9},
        ],
    }


def dump(name, obj):
    (DATA / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    dump("table2.json", {"format_version": 1, "kind": "evse_profiles", "profiles": profiles()})
    dump("table2_clusters.json", clusters())
    dump("table2_reference.json", reference())
