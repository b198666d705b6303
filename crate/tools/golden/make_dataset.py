"""Generate the synthetic golden panel used by the end-to-end regression test.

The panel covers the 28 scored countries over 2003-2017 with the four series
of the unemployment equation (unem, youth, growth, nomulc). Values are drawn
from a planted model with serially correlated errors so that period-SUR
weighting has structure to pick up. One growth observation (HR, 2004) is left
empty so the extractive sample is unbalanced.

Usage: python make_dataset.py <fixture-dir>
"""

import csv
import sys
from pathlib import Path

import numpy as np

SEED = 20190522
YEARS = list(range(2003, 2018))
MISSING_GROWTH = ("HR", 2004)

PARAMS = {
    "inclusive": (3.10, 0.29, -0.22, -0.25, 0.42),
    "extractive": (1.05, 0.38, -0.17, -0.05, 0.82),
}


def read_scores(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {r["country"]: float(r["score"]) for r in rows}


def read_events(path, horizon=2017):
    spans = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            end = horizon if r["end_year"] == "ongoing" else int(r["end_year"])
            spans.setdefault(r["country"], []).append((int(r["start_year"]), end))
    return spans


def main(out_dir):
    out_dir = Path(out_dir)
    scores = read_scores(out_dir / "scores.csv")
    events = read_events(out_dir / "events.csv")
    ordered = sorted(scores.values())
    median = 0.5 * (ordered[13] + ordered[14])

    rng = np.random.default_rng(SEED)
    rows = []
    for country in sorted(scores):
        cluster = "inclusive" if scores[country] > median else "extractive"
        c, a_youth, a_growth, a_nomulc, a_dummy = PARAMS[cluster]
        dummy = np.array(
            [float(any(s <= y <= e for s, e in events[country])) for y in YEARS]
        )
        # youth needs one extra leading year so unem(2003) has a lagged regressor
        level = rng.uniform(8.0, 30.0)
        youth = np.empty(len(YEARS) + 1)
        shock = 0.0
        for t in range(len(YEARS) + 1):
            shock = 0.6 * shock + rng.normal(0.0, 2.5)
            crisis = dummy[t - 1] if t > 0 else 0.0
            youth[t] = max(level + 4.0 * crisis + shock, 1.0)
        growth = 2.5 - 3.5 * dummy + rng.normal(0.0, 2.0, len(YEARS))
        nomulc = 2.5 + rng.normal(0.0, 2.5, len(YEARS))
        effect = rng.normal(0.0, 0.5)
        err = np.empty(len(YEARS))
        prev = 0.0
        for t in range(len(YEARS)):
            prev = 0.5 * prev + rng.normal(0.0, 0.8)
            err[t] = prev
        unem = (
            c
            + a_youth * youth[:-1]
            + a_growth * growth
            + a_nomulc * nomulc
            + a_dummy * dummy
            + effect
            + err
        )
        for t, year in enumerate(YEARS):
            g = f"{growth[t]:.2f}"
            if (country, year) == MISSING_GROWTH:
                g = ""
            rows.append(
                [country, year, f"{unem[t]:.2f}", f"{youth[t + 1]:.2f}", g, f"{nomulc[t]:.2f}"]
            )

    with open(out_dir / "panel.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "year", "unem", "youth", "growth", "nomulc"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
