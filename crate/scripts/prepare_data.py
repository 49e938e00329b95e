#!/usr/bin/env python3
"""Reproduce the vendored datasets under data/ from their public sources.

The repository already ships the prepared CSVs; this script documents the
exact provenance and transformations so they can be regenerated:

* California housing (20640 rows): the classic 1990-census table as
  distributed with scikit-learn / Kaggle ("housing.csv"). We drop the
  categorical `ocean_proximity` column and keep all rows, including the 207
  with a missing `total_bedrooms`; the training code drops incomplete rows
  at read time and reports the count.
* NASA airfoil self-noise (1503 rows): UCI repository file
  `airfoil_self_noise.dat`, tab-separated, no header. We add column names
  and replace the raw frequency in Hz with its natural logarithm, which is
  the scale on which the model (and the reference results) operate.

Usage:
    python scripts/prepare_data.py --housing PATH/housing.csv \
        --airfoil PATH/airfoil_self_noise.dat [--out data]
"""

from __future__ import annotations

import argparse
import csv
import math
from pathlib import Path

CALIFORNIA_COLUMNS = [
    "longitude",
    "latitude",
    "housing_median_age",
    "total_rooms",
    "total_bedrooms",
    "population",
    "households",
    "median_income",
    "median_house_value",
]

AIRFOIL_COLUMNS = [
    "log_frequency",
    "angle_of_attack",
    "chord_length",
    "free_stream_velocity",
    "suction_side_thickness",
    "scaled_sound_pressure",
]


def prepare_california(src: Path, dst: Path) -> None:
    with src.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    missing = [c for c in CALIFORNIA_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise SystemExit(f"{src}: missing expected columns {missing}")
    dst.parent.mkdir(parents=True, exist_ok=True)
    with dst.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALIFORNIA_COLUMNS)
        for row in rows:
            writer.writerow([row[c] for c in CALIFORNIA_COLUMNS])
    print(f"{dst}: {len(rows)} rows")


def prepare_airfoil(src: Path, dst: Path) -> None:
    out_rows = []
    for line in src.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise SystemExit(f"{src}: expected 6 whitespace-separated fields, got {parts}")
        freq_hz = float(parts[0])
        out_rows.append([repr(math.log(freq_hz))] + parts[1:])
    dst.parent.mkdir(parents=True, exist_ok=True)
    with dst.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AIRFOIL_COLUMNS)
        writer.writerows(out_rows)
    print(f"{dst}: {len(out_rows)} rows")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--housing", type=Path, help="source housing.csv (Kaggle/sklearn)")
    parser.add_argument("--airfoil", type=Path, help="source airfoil_self_noise.dat (UCI)")
    parser.add_argument("--out", type=Path, default=Path("data"))
    args = parser.parse_args()
    if not args.housing and not args.airfoil:
        parser.error("nothing to do: pass --housing and/or --airfoil")
    if args.housing:
        prepare_california(args.housing, args.out / "california" / "housing.csv")
    if args.airfoil:
        prepare_airfoil(args.airfoil, args.out / "airfoil" / "airfoil_self_noise.csv")


if __name__ == "__main__":
    main()
