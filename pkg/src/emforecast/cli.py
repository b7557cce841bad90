"""Command-line front end.

    emforecast preprocess | evaluate | forecast | calibrate  [options]

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 calibration drift.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import calibration
from .config import RunConfig, load_config
from .errors import ConfigError, DataFormatError, DegenerateInputError, ForecastError, InversionMismatchError
from .metrics import format_table, table_to_csv
from .pipeline import evaluate_zoo, future_forecast, prepare, select_models
from .plots import line_chart_svg
from .series import read_csv, write_csv
from .stattests import vif

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_DRIFT = 0, 2, 3, 4
DRIFT_TOLERANCE = 0.05


class NumericalFailure(Exception):
    pass


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _load(cfg: RunConfig):
    return read_csv(cfg.data)


def cmd_preprocess(cfg: RunConfig) -> int:
    levels = _load(cfg)
    prep = prepare(levels, cfg.max_diff_order)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "stationarity.json", prep.report.to_json() + "\n")
    _write(out, "stationarity.txt", prep.report.format_table() + "\n")
    values = vif(prep.diffed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("feature", "vif"))
    for name, v in values.items():
        w.writerow((name, f"{v:.6f}"))
    _write(out, "vif.csv", buf.getvalue())
    write_csv(prep.diffed, out / "differenced.csv")
    _write(out, "ledger.json", json.dumps(prep.ledger.to_dict(), indent=2) + "\n")
    print(prep.report.format_table())
    print("\nVIF (differenced features)")
    for name, v in values.items():
        print(f"  {name:<10}{v:8.3f}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    levels = _load(cfg)
    models = select_models(cfg.models or None, cfg.exclude)
    if not models:
        raise ConfigError("model selection is empty")
    prep = prepare(levels, cfg.max_diff_order)
    res = evaluate_zoo(prep, cfg.seed, cfg.test_len, cfg.lags, models, cfg.overrides)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "evaluation.csv", table_to_csv(res.summary_rows()))
    _write(out, "evaluation.json", res.to_json() + "\n")
    sections = [("Univariate", "univariate"), ("Multivariate", "multivariate")]
    text = []
    for title, group in sections:
        if res.has_group(group):
            rows = res.group_rows(group)
            _write(out, f"{group}.csv", table_to_csv(rows))
            text += [title, format_table(rows), ""]
    ens = res.ensemble_rows()
    if ens is not None:
        _write(out, "ensemble.csv", table_to_csv(ens))
        text += ["Ensemble vs base models", format_table(ens), ""]
    text += ["Overall", format_table(res.summary_rows())]
    _write(out, "evaluation.txt", "\n".join(text) + "\n")
    print("\n".join(text))
    if res.all_failed:
        raise NumericalFailure("every model failed")
    return EXIT_OK


def cmd_forecast(cfg: RunConfig) -> int:
    levels = _load(cfg)
    prep = prepare(levels, cfg.max_diff_order)
    ens, path = future_forecast(prep, cfg.seed, cfg.horizon, cfg.lags, cfg.overrides)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "forecast.csv", path.to_csv())
    _write(out, "forecast.json", path.to_json() + "\n")
    if cfg.emit_plots:
        years = list(levels.years) + list(path.years)
        values = list(levels.target.values) + list(path.values)
        svg = line_chart_svg(years, values, len(levels), "CO2 per capita: history and forecast", "t per person")
        _write(out, "forecast.svg", svg)
    print(path.to_csv(), end="")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    sim = calibration.simulate_table(cfg.seed, cfg.replications)
    rows = calibration.compare_tables(sim, calibration.load_embedded_table())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("test", "regression", "T", "level", "simulated", "embedded", "deviation"))
    for r in rows:
        w.writerow((r["test"], r["regression"], r["T"], f"{r['level']:.2f}", f"{r['simulated']:.4f}",
                    f"{r['embedded']:.4f}", f"{r['deviation']:.4f}"))
    _write(out, "calibration.csv", buf.getvalue())
    worst = max(r["deviation"] for r in rows)
    drift = [r for r in rows if r["deviation"] > DRIFT_TOLERANCE]
    doc = {"seed": cfg.seed, "replications": cfg.replications, "max_deviation": worst,
           "tolerance": DRIFT_TOLERANCE, "drift": bool(drift), "simulated": sim, "rows": rows}
    _write(out, "calibration.json", json.dumps(doc, indent=2) + "\n")
    print(f"{len(rows)} critical values compared; max deviation {worst:.4f} (tolerance {DRIFT_TOLERANCE})")
    if drift:
        for r in drift:
            print(f"  drift: {r['test']}/{r['regression']} T={r['T']} level={r['level']}: "
                  f"{r['simulated']:.4f} vs {r['embedded']:.4f}", file=sys.stderr)
        return EXIT_DRIFT
    return EXIT_OK


COMMANDS = {"preprocess": cmd_preprocess, "evaluate": cmd_evaluate, "forecast": cmd_forecast, "calibrate": cmd_calibrate}


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="input CSV (default: bundled snapshot)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--horizon", type=int, help="forecast horizon in years")
    common.add_argument("--models", type=_csv_list, help="comma-separated model keys to include")
    common.add_argument("--exclude", type=_csv_list, help="comma-separated model keys to skip")
    common.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None, help="emit SVG plots")
    common.add_argument("--replications", type=int, help="Monte-Carlo replications for calibrate")
    ap = argparse.ArgumentParser(prog="emforecast", description="Emission forecasting toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__ or name.replace("_", " "))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, data=args.data, seed=args.seed, out=args.out, horizon=args.horizon,
                          models=args.models, exclude=args.exclude, emit_plots=args.plots,
                          replications=args.replications)
        return COMMANDS[args.command](cfg)
    except (DataFormatError, ConfigError, DegenerateInputError, InversionMismatchError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ForecastError, ArithmeticError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
