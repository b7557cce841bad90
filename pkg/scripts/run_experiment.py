"""End-to-end reproduction run: preprocessing, holdout evaluation, ten-year forecast.

Prints the report tables and the directional checks; writes everything
under --out (default runs/experiment).
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from emforecast.cli import main as cli_main
from emforecast.config import bundled_snapshot


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default=str(bundled_snapshot()))
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=Path, default=Path("runs/experiment"))
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    for cmd in ("preprocess", "evaluate", "forecast"):
        extra = ["--plots"] if cmd == "forecast" else []
        code = cli_main([cmd, "--data", args.data, "--seed", str(args.seed), "--out", str(args.out), *extra])
        if code:
            raise SystemExit(code)
    doc = json.loads((args.out / "evaluation.json").read_text())
    best = {}
    for group in ("univariate", "multivariate"):
        ranked = [r for r in doc[group] if r["rank"] is not None]
        best[group] = min(ranked, key=lambda r: r["rank"])
    ens = {r["model"]: r for r in doc.get("ensemble", [])}
    fc = json.loads((args.out / "forecast.json").read_text())["rows"]
    print("\nDirectional checks")
    print(f"  best univariate   {best['univariate']['model']:<24} SMAPE {best['univariate']['SMAPE']:.3f}")
    print(f"  best multivariate {best['multivariate']['model']:<24} SMAPE {best['multivariate']['SMAPE']:.3f}")
    if "Ensemble" in ens:
        print(f"  ensemble SMAPE {ens['Ensemble']['SMAPE']:.3f}")
    vals = [r["co2_per_capita_t"] for r in fc]
    print(f"  forecast {fc[0]['year']}-{fc[-1]['year']}: {min(vals):.3f} to {max(vals):.3f} t")
    print(f"  elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
