"""Six level-scale accuracy metrics and ranked report tables."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

METRIC_NAMES = ("mae", "mse", "rmse", "mape_pct", "smape_pct", "max_error")
TABLE_HEADER = ("model", "MAE", "MSE", "RMSE", "MAPE", "SMAPE", "MaxError", "rank")


@dataclass(frozen=True)
class MetricBundle:
    mae: float
    mse: float
    rmse: float
    mape_pct: float  # nan when any actual value is zero
    smape_pct: float
    max_error: float

    def as_dict(self) -> dict:
        return asdict(self)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in METRIC_NAMES)


def evaluate(y_true, y_pred) -> MetricBundle:
    a = np.asarray(y_true, dtype=np.float64).reshape(-1)
    f = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if a.size == 0 or a.size != f.size:
        raise ValueError(f"need equal non-zero lengths, got {a.size} and {f.size}")
    err = np.abs(a - f)
    mse = float(np.mean(err**2))
    if np.any(a == 0):
        mape = math.nan
    else:
        mape = 100.0 * float(np.mean(err / np.abs(a)))
    denom = (np.abs(a) + np.abs(f)) / 2.0
    terms = np.divide(err, denom, out=np.zeros_like(err), where=denom != 0)
    return MetricBundle(
        mae=float(np.mean(err)),
        mse=mse,
        rmse=math.sqrt(mse),
        mape_pct=mape,
        smape_pct=100.0 * float(np.mean(terms)),
        max_error=float(np.max(err)),
    )


@dataclass(frozen=True)
class RankedRow:
    model: str
    bundle: MetricBundle | None
    rank: int | None
    note: str = ""


def _key_value(bundle: MetricBundle, key: str) -> float:
    v = getattr(bundle, key)
    return math.inf if math.isnan(v) else v


def rank_models(
    bundles: Mapping[str, MetricBundle],
    key: str = "smape_pct",
    failures: Mapping[str, str] | None = None,
) -> list[RankedRow]:
    """Ascending by ``key``; ties fall back to MAE, then model name. Failed models trail unranked."""
    if not bundles and not failures:
        raise ValueError("nothing to rank")
    if key not in METRIC_NAMES:
        raise ValueError(f"unknown ranking metric {key!r}")
    order = sorted(bundles, key=lambda m: (_key_value(bundles[m], key), bundles[m].mae, m))
    rows = [RankedRow(m, bundles[m], i) for i, m in enumerate(order, start=1)]
    for name in sorted(failures or {}):
        rows.append(RankedRow(name, None, None, failures[name]))
    return rows


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def table_to_csv(rows: list[RankedRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER + ("note",))
    for r in rows:
        vals = [_fmt(v) for v in r.bundle.values()] if r.bundle else [""] * len(METRIC_NAMES)
        w.writerow([r.model, *vals, "" if r.rank is None else r.rank, r.note])
    return buf.getvalue()


def table_to_records(rows: list[RankedRow]) -> list[dict]:
    out = []
    for r in rows:
        rec = {"model": r.model}
        for col, name in zip(TABLE_HEADER[1:7], METRIC_NAMES):
            v = getattr(r.bundle, name) if r.bundle else None
            rec[col] = None if v is None or math.isnan(v) else round(v, 10)
        rec["rank"] = r.rank
        if r.note:
            rec["note"] = r.note
        out.append(rec)
    return out


def table_to_json(rows: list[RankedRow]) -> str:
    return json.dumps(table_to_records(rows), indent=2, sort_keys=False)


def format_table(rows: list[RankedRow]) -> str:
    """Fixed-width text rendering for terminals."""
    lines = [f"{'Model':<22}{'MAE':>9}{'MSE':>9}{'RMSE':>9}{'MAPE':>9}{'SMAPE':>9}{'MaxErr':>9}{'Rank':>6}"]
    for r in rows:
        if r.bundle is None:
            lines.append(f"{r.model:<22}{'failed: ' + r.note:>60}")
            continue
        b = r.bundle
        mape = "n/a" if math.isnan(b.mape_pct) else f"{b.mape_pct:.3f}"
        lines.append(
            f"{r.model:<22}{b.mae:>9.3f}{b.mse:>9.3f}{b.rmse:>9.3f}{mape:>9}{b.smape_pct:>9.3f}{b.max_error:>9.3f}{r.rank:>6}"
        )
    return "\n".join(lines)
