"""Generate the bundled synthetic snapshot (1965-2022).

Fuel consumption paths are log-linear interpolations through rough anchor
values resembling Taiwan's public record, perturbed by seeded AR(1)
multiplicative noise. CO2 per capita is built from fixed emission factors
and a population path, so it is coupled to the fuels the way real
emissions are. The output is synthetic and only meant for offline runs.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from emforecast.numerics import RngStream
from emforecast.series import CSV_HEADER, Dataset, write_csv

SEED = 20240607
YEARS = np.arange(1965, 2023)

ANCHORS = {
    "coal_twh": {1965: 28, 1975: 32, 1985: 125, 1995: 235, 2005: 420, 2010: 458, 2015: 468, 2018: 482, 2022: 455},
    "oil_twh": {1965: 15, 1975: 120, 1985: 205, 1995: 385, 2005: 560, 2010: 530, 2015: 540, 2022: 505},
    "gas_twh": {1965: 1.2, 1975: 12, 1985: 13, 1995: 42, 2005: 112, 2010: 160, 2015: 212, 2022: 280},
    "population_m": {1965: 12.6, 1975: 16.1, 1985: 19.2, 1995: 21.4, 2005: 22.7, 2015: 23.5, 2022: 23.9},
}
# tonnes CO2 per MWh of primary energy (oil lowered for non-combustion feedstock use)
FACTORS = {"coal_twh": 0.34, "oil_twh": 0.18, "gas_twh": 0.20}
SCALE = 0.95
NOISE = {"coal_twh": 0.04, "oil_twh": 0.03, "gas_twh": 0.06}
AR_PHI = 0.6


def log_path(anchors: dict) -> np.ndarray:
    xs = np.array(sorted(anchors), dtype=float)
    ys = np.log([anchors[int(x)] for x in xs])
    return np.exp(np.interp(YEARS, xs, ys))


def ar_noise(sd: float, gen: np.random.Generator) -> np.ndarray:
    e = gen.normal(scale=sd, size=YEARS.size)
    out = np.empty_like(e)
    out[0] = e[0]
    for t in range(1, e.size):
        out[t] = AR_PHI * out[t - 1] + e[t]
    return out


def build(seed: int = SEED) -> Dataset:
    root = RngStream(seed, "synthetic-snapshot")
    fuels = {}
    for name in ("gas_twh", "coal_twh", "oil_twh"):
        gen = root.child(name).generator()
        fuels[name] = np.round(log_path(ANCHORS[name]) * np.exp(ar_noise(NOISE[name], gen)), 3)
    pop = log_path(ANCHORS["population_m"])
    mt = sum(FACTORS[k] * fuels[k] for k in FACTORS) * SCALE
    gen = root.child("co2").generator()
    co2 = np.round(mt / pop * np.exp(gen.normal(scale=0.01, size=YEARS.size)), 3)
    cols = np.column_stack([co2, fuels["gas_twh"], fuels["coal_twh"], fuels["oil_twh"]])
    return Dataset.from_matrix(CSV_HEADER[1:], int(YEARS[0]), cols)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=SEED)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/emforecast/data/snapshot.csv")
    args = ap.parse_args(argv)
    ds = build(args.seed)
    write_csv(ds, args.out, "{:.3f}")
    meta = {"vintage": "synthetic", "seed": args.seed, "generator": "scripts/make_synthetic_snapshot.py",
            "years": [ds.start_year, ds.end_year]}
    args.out.with_name("snapshot_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {args.out} ({len(ds)} rows)")


if __name__ == "__main__":
    main()
