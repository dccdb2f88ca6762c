#!/usr/bin/env python3
"""Rebuild the synthetic test corpus under tests/fixtures/.

Everything here is computed with the standard library only, independent of
the package under test, so the committed files double as reference values.
A handful of cells are pinned because tests assert them verbatim; the rest
is seeded noise in plausible ranges. The question-suite files that ship
verbatim (search_s1/prediction_s2/generation_s3) are static data and are
NOT regenerated here.

Run from the repository root:  python3 scripts/build_fixtures.py
"""

import csv
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

TOPOLOGIES = ("pcu", "dia", "acs", "rtl", "cds", "srs", "ths", "bcu", "fsc")
BLOCK1 = [f"N{i}" for i in range(1, 21)]
BLOCK2 = [f"N{100 + j}" for j in range(1, 21)]

METALS = ["Cu", "Zn", "Fe", "Co", "Ni", "Mn", "Al", "Zr", "Cd", "Mg"]

# cells the test-suite asserts verbatim
JUKPAI_INDEX = 4837
JUKPAI_ASA_VOL = 1474.22
YUSGID_INDEX = 11739
YUSGID_PLD = 3.71515
ACOGEF_INDEX = 151
ACOGEF_GSA = 1138.35
ACOGEF_BANDGAP = 3.41139
XEGKUR_HENRY_LOG = -3.62769

KNOWN_NAMES = [
    "VAHSON", "QULMIU", "WOBCAT", "NELVAC", "LOLREL", "DUFKAS", "MOJJUR",
    "UXUPEJ", "NATXIR", "TUFTAR", "GEDQOX", "YAVVUP", "CSMNOX", "WABTOK",
    "HUZFIS", "LITDAV", "OSIXEU", "UZANOZ", "TONTIB_clean", "FIJDIM05",
]

PREDICTION_NAMES = [
    "XEGKUR_clean", "ACOGEF", "DUVNIS01_charged", "NISPEL_charged",
    "KUGQIN_clean", "IZEHAX_clean", "WOYJOL_clean", "GUCJAQ_clean",
    "MIFROK_clean", "OCUVUF_clean", "JALCAD_clean", "COKMUM_clean",
    "XAVDUV_clean", "XAHWAG_clean", "UXABUR_clean", "LOQLIN_SL",
    "ZAXQOG_clean", "QINSUD_clean", "AYOYOE_clean", "IHAJIL_clean",
    "GAJTUI_clean", "JEDJUY_clean",
]


def make_refcode(rng: random.Random) -> str:
    consonants = "BCDFGHJKLMNPQRSTVWXZ"
    vowels = "AEIOU"
    return "".join(
        rng.choice(vowels if i in (1, 4) else consonants) for i in range(6))


def build_coremof(rng: random.Random) -> list[dict]:
    names = ["JUKPAI", "YUSGID", "ACOGEF"] + list(KNOWN_NAMES)
    while len(names) < 50:
        code = make_refcode(rng)
        if code not in names:
            names.append(code)

    taken = {JUKPAI_INDEX, YUSGID_INDEX, ACOGEF_INDEX}
    free = [i for i in range(14000) if i not in taken]
    indices = {"JUKPAI": JUKPAI_INDEX, "YUSGID": YUSGID_INDEX,
               "ACOGEF": ACOGEF_INDEX}
    for name, idx in zip([n for n in names if n not in indices],
                         rng.sample(free, 47)):
        indices[name] = idx

    rows = []
    for name in names:
        lcd = round(rng.uniform(4.0, 24.0), 5)
        pld = round(lcd * rng.uniform(0.30, 0.80), 5)
        lfpd = round(lcd * rng.uniform(0.85, 1.0), 5)
        row = {
            "index": indices[name],
            "name": name,
            "Largest cavity diameter (Å)": lcd,
            "Pore limiting diameter (Å)": pld,
            "Largest free pore diameter (Å)": lfpd,
            "Density (g/cm^3)": round(rng.uniform(0.25, 2.4), 5),
            "Gravimetric Surface Area (m^2/g)": round(rng.uniform(50, 5800), 2),
            "Accessible Surface Area (m^2/cm^3)": round(rng.uniform(100, 2400), 2),
            "Accessible Volume Fraction": round(rng.uniform(0.08, 0.92), 5),
            "Accessible Volume (cm^3/g)": round(rng.uniform(0.12, 2.8), 5),
            "Metal Type": rng.choice(METALS),
            "Has Open Metal Site": rng.choice(["yes", "no"]),
        }
        rows.append(row)

    by_name = {r["name"]: r for r in rows}
    by_name["JUKPAI"]["Accessible Surface Area (m^2/cm^3)"] = JUKPAI_ASA_VOL
    by_name["YUSGID"]["Pore limiting diameter (Å)"] = YUSGID_PLD
    by_name["ACOGEF"]["Gravimetric Surface Area (m^2/g)"] = ACOGEF_GSA
    by_name["VAHSON"]["Has Open Metal Site"] = "yes"
    by_name["QULMIU"]["Metal Type"] = "Cu"

    rows.sort(key=lambda r: r["index"])
    return rows


def write_coremof(rows: list[dict], path: Path) -> None:
    headers = [k for k in rows[0] if k != "index"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + headers)
        for row in rows:
            writer.writerow([row["index"]] + [row[h] for h in headers])


def build_predictions(rng: random.Random) -> list[dict]:
    names = list(PREDICTION_NAMES)
    while len(names) < 30:
        code = make_refcode(rng) + "_clean"
        if code not in names:
            names.append(code)
    rows = []
    for i, name in enumerate(names):
        rows.append({
            "name": name,
            "Topology": TOPOLOGIES[i % len(TOPOLOGIES)],
            "bandgap": round(rng.uniform(0.4, 3.3), 5),
            "CO2_henry_coefficient_298K": round(rng.uniform(-8.5, -1.8), 5),
        })
    by_name = {r["name"]: r for r in rows}
    by_name["ACOGEF"]["bandgap"] = ACOGEF_BANDGAP  # strict column maximum
    by_name["XEGKUR_clean"]["CO2_henry_coefficient_298K"] = XEGKUR_HENRY_LOG
    assert max(r["bandgap"] for r in rows) == ACOGEF_BANDGAP
    assert sum(1 for r in rows if r["bandgap"] == ACOGEF_BANDGAP) == 1
    return rows


def write_rows(rows: list[dict], path: Path) -> None:
    headers = list(rows[0])
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for row in rows:
            writer.writerow([row[h] for h in headers])


def landscape_values(t: int, j: int, k: int, rng: random.Random) -> tuple[float, float]:
    # Uptake is dominated by which block1 family the gene uses (four steps of
    # ten), with a slow block2 swell on top.  Recombining genes from one family
    # therefore stays near that family's level, which is what lets breeding
    # runs tighten around a target instead of scattering.
    level = 10.0 * (j // 5)
    swell = 3.0 + 2.9 * math.sin(k * math.pi / 6.5 + 0.7 * t)
    uptake = 2.0 + 0.3 * t + level + swell + rng.uniform(-0.4, 0.4)
    fraction = 0.5 + 0.42 * math.sin(0.33 * j - 0.27 * k + 0.8 * t) \
        + rng.uniform(-0.01, 0.01)
    fraction = min(max(fraction, 0.03), 0.97)
    return round(uptake, 4), round(fraction, 5)


def build_landscape(rng: random.Random) -> list[dict]:
    rows = []
    for t, topology in enumerate(TOPOLOGIES):
        for j, b1 in enumerate(BLOCK1):
            for k, b2 in enumerate(BLOCK2):
                uptake, fraction = landscape_values(t, j, k, rng)
                rows.append({"gene": f"{topology}+{b1}+{b2}",
                             "hydrogen_uptake": uptake,
                             "void_fraction": fraction})
    return rows


def _grid_indices(gene: str) -> tuple[int, int]:
    _, b1, b2 = gene.split("+")
    return int(b1[1:]) - 1, int(b2[1:]) - 101


def build_pool(landscape: list[dict], rng: random.Random) -> list[dict]:
    # Hold back most of the top block1 family so the pool is sparse where
    # uptake is highest: runs that chase a high-uptake target start from a
    # spread-out batch and have to breed their way into the thin region.
    candidates = []
    for row in landscape:
        j, k = _grid_indices(row["gene"])
        if j // 5 == 3 and (j * 20 + k) % 13 != 2:
            continue
        candidates.append(row)
    pool = rng.sample(candidates, 2000)
    pool.sort(key=lambda r: r["gene"])
    per_topology = {}
    top_family = {}
    for row in pool:
        topo = row["gene"].split("+")[0]
        per_topology[topo] = per_topology.get(topo, 0) + 1
        j, _ = _grid_indices(row["gene"])
        if j // 5 == 3:
            top_family[topo] = top_family.get(topo, 0) + 1
    for topology in TOPOLOGIES:
        count = per_topology.get(topology, 0)
        assert count >= 120, f"pool too thin for {topology}: {count}"
        kept = top_family.get(topology, 0)
        assert 2 <= kept <= 12, f"top-family seeds off for {topology}: {kept}"
    return pool


def registry_doc() -> dict:
    return {
        "tables": [
            {"name": "coremof", "path": "coremof_mini.csv",
             "key_column": "name", "primary": True},
            {"name": "predictions", "path": "predictions_mini.csv",
             "key_column": "name"},
            {"name": "gene_landscape", "path": "gene_landscape.csv",
             "key_column": "gene"},
            {"name": "gene_pool", "path": "gene_pool.csv",
             "key_column": "gene"},
        ],
        "pool_table": "gene_pool",
        "lookups": [
            {"property": {"name": "bandgap", "unit": "eV", "scale": "linear",
                          "aliases": ["band gap", "bandgap"]},
             "table": "predictions", "column": "bandgap",
             "material_kind": "named_mof"},
            {"property": {"name": "CO2_henry_coefficient_298K",
                          "unit": "mol/Kg·Pa", "scale": "log",
                          "aliases": ["CO2 Henry coefficient at 298 K",
                                      "CO2 Henry coefficient"]},
             "table": "predictions", "column": "CO2_henry_coefficient_298K",
             "material_kind": "named_mof"},
            {"property": {"name": "hydrogen_uptake", "unit": "g/L",
                          "scale": "linear",
                          "aliases": ["hydrogen uptake at 100 bar",
                                      "hydrogen uptake"]},
             "table": "gene_landscape", "column": "hydrogen_uptake",
             "material_kind": "gene"},
            {"property": {"name": "void_fraction", "unit": "", "scale": "linear",
                          "aliases": ["void fraction",
                                      "accessible void fraction"]},
             "table": "gene_landscape", "column": "void_fraction",
             "material_kind": "gene"},
        ],
    }


def write_jsonl(records: list[dict], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def replay_transcripts() -> dict[str, list[dict]]:
    def user(text):
        return {"role": "user", "content": text}

    def assistant(text):
        return {"role": "assistant", "content": text}

    jukpai = [
        user("How high is the accessible surface area of JUKPAI?"),
        assistant("Thought: I need to find the accessible surface area of JUKPAI\n"
                  "Action: search_csv\n"
                  "Action Input: \"Search name JUKPAI and provide information of "
                  "its accessible surface area\""),
        assistant("Thought: I now know the final answer\n"
                  "Final Answer: The accessible surface area for JUKPAI is "
                  "1474.22 m²/cm³"),
    ]
    xegkur = [
        user("At room temperature (298K), what's the CO2 Henry coefficient "
             "for XEGKUR?"),
        assistant("Thought: I need to find the CO2 Henry coefficient for XEGKUR "
                  "at room temperature\n"
                  "Action: search_csv\n"
                  "Action Input: \"Search name XEGKUR and provide information on "
                  "its CO2 Henry coefficient at 298K\""),
        assistant("Thought: The table has no CO2 Henry coefficient data, so I "
                  "should use the property predictor\n"
                  "Action: predictor\n"
                  "Action Input: Predict the CO2 Henry coefficient for XEGKUR "
                  "at 298K"),
        assistant("Thought: I need to convert the logarithmic value to the "
                  "original value\n"
                  "Action: Python_REPL\n"
                  "Action Input: import math\n"
                  "print (math.exp(-3.62769))"),
        assistant("Thought: I now know the final answer\n"
                  "Final Answer: The CO2 Henry coefficient for XEGKUR at room "
                  "temperature is approximately 0.027 mol/Kg·Pa"),
    ]
    acogef = [
        user("What is the surface area and bandgap of ACOGEF?"),
        assistant("Thought: I need to find the surface area of ACOGEF\n"
                  "Action: search_csv\n"
                  "Action Input: \"Search name ACOGEF and provide information on "
                  "its surface area\""),
        assistant("Thought: The search gave the surface area of ACOGEF but not "
                  "the bandgap, so I need to look for the bandgap\n"
                  "Action: search_csv\n"
                  "Action Input: \"Search name ACOGEF and provide information on "
                  "its bandgap\""),
        assistant("Thought: The table has no bandgap column, so I should use the "
                  "property predictor\n"
                  "Action: predictor\n"
                  "Action Input: Predict the bandgap of ACOGEF"),
        assistant("Thought: I now know the final answer\n"
                  "Final Answer: The bandgap and surface area of ACOGEF is "
                  "3.41139 eV and 1138.35 m²/g"),
    ]
    return {"jukpai.jsonl": jukpai, "xegkur.jsonl": xegkur,
            "acogef.jsonl": acogef}


def lookup_suite(coremof: list[dict], predictions: list[dict]) -> list[dict]:
    """Thirty end-to-end items whose expectations come straight from the tables.

    Nineteen table lookups, seven model predictions, four generation runs —
    every expected value is recomputed here from the generated rows, so the
    suite stays an independent check on whatever answers the agent produces.
    """
    gsa = "Gravimetric Surface Area (m^2/g)"
    max_gsa = max(r[gsa] for r in coremof)
    dense = [r["name"] for r in coremof if r["Density (g/cm^3)"] > 2.0]
    assert 1 <= len(dense) <= 10, f"density cutoff hits {len(dense)} rows"
    henry_value = math.exp(XEGKUR_HENRY_LOG)

    by_name = {r["name"]: r for r in coremof}
    min_density = min(r["Density (g/cm^3)"] for r in coremof)
    max_lcd = max(r["Largest cavity diameter (Å)"] for r in coremof)
    gsa_rich = [r["name"] for r in coremof if r[gsa] > 5000]
    assert gsa_rich, "no coremof row above the 5000 m^2/g cutoff"

    pred_by_name = {r["name"]: r for r in predictions}
    bandgaps = sorted(r["bandgap"] for r in predictions)
    assert bandgaps[0] < bandgaps[1], "lowest bandgap must be unique"
    henry_above = sum(1 for r in predictions
                      if r["CO2_henry_coefficient_298K"] > -4.0)
    assert henry_above >= 1
    duvnis_henry = math.exp(
        pred_by_name["DUVNIS01_charged"]["CO2_henry_coefficient_298K"])

    def item(n, task, question, expect):
        return {"id": f"fx-{n:02d}", "task": task, "question": question,
                "expect": expect}

    return [
        item(1, "search", "What is the pore limiting diameter of YUSGID?",
             {"kind": "numeric", "value": YUSGID_PLD, "rel_tol": 1e-6}),
        item(2, "search", "How high is the accessible surface area of JUKPAI?",
             {"kind": "numeric", "value": JUKPAI_ASA_VOL, "rel_tol": 1e-6}),
        item(3, "search", "Can you provide the top 5 materials with the highest "
                          "gravimetric surface area?",
             {"kind": "numeric", "value": max_gsa, "rel_tol": 1e-6}),
        item(4, "search", "How does the pore limiting diameter of YUSGID "
                          "compare with other materials?",
             {"kind": "numeric", "value": YUSGID_PLD, "rel_tol": 1e-6}),
        item(5, "search", "Does VAHSON have an open metal site?",
             {"kind": "contains", "text": "yes"}),
        item(6, "search", "What is the metal type in QULMIU?",
             {"kind": "contains", "text": "Cu"}),
        item(7, "search", "Can you list materials with a density greater than "
                          "a 2.0?",
             {"kind": "contains", "text": dense[0]}),
        item(8, "prediction", "Predict the bandgap of ACOGEF",
             {"kind": "numeric", "value": ACOGEF_BANDGAP, "rel_tol": 1e-6}),
        item(9, "prediction", "At room temperature (298K), what's the CO2 Henry "
                              "coefficient for XEGKUR_clean?",
             {"kind": "numeric", "value": henry_value, "rel_tol": 1e-9}),
        item(10, "generation", "Can you generate structures with the largest "
                               "hydrogen uptake?",
             {"kind": "contains", "text": "best candidate is"}),
        # --- table lookups over the remaining pinned-noise cells ---
        item(11, "search", "What is the largest cavity diameter of ACOGEF?",
             {"kind": "numeric",
              "value": by_name["ACOGEF"]["Largest cavity diameter (Å)"],
              "rel_tol": 1e-6}),
        item(12, "search", "What is the density of WOBCAT?",
             {"kind": "numeric", "value": by_name["WOBCAT"]["Density (g/cm^3)"],
              "rel_tol": 1e-6}),
        item(13, "search", "Search name ACOGEF and provide information of its "
                           "gravimetric surface area",
             {"kind": "numeric", "value": ACOGEF_GSA, "rel_tol": 1e-6}),
        item(14, "search", "What is the pore limiting diameter of ACOGEF?",
             {"kind": "numeric",
              "value": by_name["ACOGEF"]["Pore limiting diameter (Å)"],
              "rel_tol": 1e-6}),
        item(15, "search", "How high is the accessible volume fraction of LOLREL?",
             {"kind": "numeric",
              "value": by_name["LOLREL"]["Accessible Volume Fraction"],
              "rel_tol": 1e-6}),
        item(16, "search", "What is the accessible volume of DUFKAS?",
             {"kind": "numeric",
              "value": by_name["DUFKAS"]["Accessible Volume (cm^3/g)"],
              "rel_tol": 1e-6}),
        item(17, "search", "Can you show the lowest 3 materials by density?",
             {"kind": "numeric", "value": min_density, "rel_tol": 1e-6}),
        item(18, "search", "Can you provide the top 3 materials with the "
                           "highest largest cavity diameter?",
             {"kind": "numeric", "value": max_lcd, "rel_tol": 1e-6}),
        item(19, "search", "Can you list materials with a gravimetric surface "
                           "area greater than a 5000?",
             {"kind": "contains", "text": gsa_rich[0]}),
        item(20, "search", "How does the density of TUFTAR compare with other "
                           "materials?",
             {"kind": "numeric", "value": by_name["TUFTAR"]["Density (g/cm^3)"],
              "rel_tol": 1e-6}),
        item(21, "search", "What is the largest free pore diameter of MOJJUR?",
             {"kind": "numeric",
              "value": by_name["MOJJUR"]["Largest free pore diameter (Å)"],
              "rel_tol": 1e-6}),
        item(22, "search", "What is the metal type in GEDQOX?",
             {"kind": "contains", "text": by_name["GEDQOX"]["Metal Type"]}),
        # --- predictions ---
        item(23, "prediction", "Predict the bandgap of KUGQIN_clean",
             {"kind": "numeric", "value": pred_by_name["KUGQIN_clean"]["bandgap"],
              "rel_tol": 1e-6}),
        item(24, "prediction", "Predict the bandgap of all materials. Which "
                               "material has the highest bandgap?",
             {"kind": "numeric", "value": ACOGEF_BANDGAP, "rel_tol": 1e-6}),
        item(25, "prediction", "Which material do you predict to have the "
                               "lowest bandgap?",
             {"kind": "numeric", "value": bandgaps[0], "rel_tol": 1e-6}),
        item(26, "prediction", "Predict the CO2 Henry coefficient at 298 K for "
                               "DUVNIS01_charged",
             {"kind": "numeric", "value": duvnis_henry, "rel_tol": 1e-9}),
        item(27, "prediction", "How many materials have a predicted CO2 Henry "
                               "coefficient higher than -4.0?",
             {"kind": "numeric", "value": float(henry_above), "rel_tol": 1e-9}),
        # --- generation ---
        item(28, "generation", "Can you generate structures with a void "
                               "fraction near 0.5?",
             {"kind": "contains", "text": "best candidate is"}),
        item(29, "generation", "Design a material with the smallest void "
                               "fraction",
             {"kind": "contains", "text": "best candidate is"}),
        item(30, "generation", "Generate structures with hydrogen uptake "
                               "between 30 and 40",
             {"kind": "contains", "text": "best candidate is"}),
    ]


CUBIC_CIF = """\
data_cubic_test
_cell_length_a 10.0
_cell_length_b 10.0
_cell_length_c 10.0
_cell_angle_alpha 90.0
_cell_angle_beta 90.0
_cell_angle_gamma 90.0
loop_
_atom_site_label
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Cu1 0.0 0.0 0.0
Cu2 0.5 0.5 0.5
O1 0.25 0.25 0.25
O2 0.75 0.75 0.75
C1 0.1 0.2 0.3
C2 0.4 0.5 0.6
H1 0.9 0.8 0.7
"""

TRICLINIC_CIF = """\
data_triclinic_test
_cell_length_a 8.2000(3)
_cell_length_b 9.1000(2)
_cell_length_c 11.4000(5)
_cell_angle_alpha 77.30(2)
_cell_angle_beta 102.60(3)
_cell_angle_gamma 91.20(2)
loop_
_atom_site_label
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Zn1 Zn2+ 0.1234 0.2345 0.3456
O1 O 0.5 0.4 0.3
O2 O 0.2 0.1 0.6
N1 N 0.7 0.8 0.9
C1 C 0.11 0.22 0.33
C2 C 0.44 0.55 0.66
C3 C 0.77 0.88 0.99
H1 H 0.01 0.02 0.03
"""


def main() -> None:
    data = FIXTURES / "data"
    replay = FIXTURES / "replay"
    suites = FIXTURES / "suites"
    cifs = FIXTURES / "cifs"
    for directory in (data, replay, suites, cifs):
        directory.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20240817)
    coremof = build_coremof(rng)
    write_coremof(coremof, data / "coremof_mini.csv")

    predictions = build_predictions(rng)
    write_rows(predictions, data / "predictions_mini.csv")

    landscape_rng = random.Random(99)
    landscape = build_landscape(landscape_rng)
    write_rows(landscape, data / "gene_landscape.csv")
    pool = build_pool(landscape, random.Random(7))
    write_rows(pool, data / "gene_pool.csv")

    (data / "registry.json").write_text(
        json.dumps(registry_doc(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")

    for fname, records in replay_transcripts().items():
        write_jsonl(records, replay / fname)

    write_jsonl(lookup_suite(coremof, predictions), suites / "fixture_lookup.jsonl")

    (cifs / "cubic.cif").write_text(CUBIC_CIF, encoding="utf-8")
    (cifs / "triclinic.cif").write_text(TRICLINIC_CIF, encoding="utf-8")

    print(f"coremof rows: {len(coremof)}")
    print(f"prediction rows: {len(predictions)}")
    print(f"landscape rows: {len(landscape)}; pool rows: {len(pool)}")
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
