"""Rebuild src/emforecast/data/critical_values.json by Monte-Carlo simulation.

Usage: python scripts/regenerate_critical_values.py [--seed N] [--replications N]
"""
import argparse
import json
from pathlib import Path

from emforecast.calibration import DEFAULT_REPLICATIONS, simulate_table

TABLE_SEED = 20240607
OUT = Path(__file__).resolve().parents[1] / "src" / "emforecast" / "data" / "critical_values.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=TABLE_SEED)
    ap.add_argument("--replications", type=int, default=DEFAULT_REPLICATIONS)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    table = simulate_table(args.seed, args.replications)
    args.out.write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
