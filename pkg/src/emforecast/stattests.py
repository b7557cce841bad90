"""Unit-root (ADF) and stationarity (KPSS) tests, VIF screening, and the stationarization loop."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .calibration import interpolate_critical_values, kpss_bandwidth, load_embedded_table
from .errors import DegenerateInputError, RankDeficiencyError
from .series import Dataset, TimeSeries, TransformLedger, difference_dataset

MIN_OBS = 15
LAG_TRIM_T = 1.645


@lru_cache(maxsize=1)
def _table() -> dict:
    return load_embedded_table()


def critical_values(test: str, regression: str, nobs: int) -> dict[float, float]:
    return interpolate_critical_values(_table(), test, regression, nobs)


@dataclass(frozen=True)
class TestResult:
    test: str
    statistic: float
    critical_values: Mapping[float, float]
    lags_or_bandwidth: int
    rejected_at_5pct: bool
    nobs: int

    @property
    def indicates_stationary(self) -> bool:
        # ADF rejects a unit root; KPSS rejects stationarity
        return self.rejected_at_5pct if self.test == "adf" else not self.rejected_at_5pct


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


def _ols_t(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and t-ratios; raises on a singular design."""
    n, p = A.shape
    if np.linalg.matrix_rank(A) < p:
        raise RankDeficiencyError("singular unit-root regression")
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = b - A @ coef
    s2 = float(resid @ resid) / (n - p)
    cov = s2 * np.linalg.inv(A.T @ A)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    return coef, t


def _adf_design(y: np.ndarray, p: int, start: int, regression: str) -> tuple[np.ndarray, np.ndarray]:
    # dy[k] = y[k+1] - y[k]; response rows k = start .. len(dy)-1
    dy = np.diff(y)
    ks = np.arange(start, dy.size)
    cols = [y[ks]]
    cols += [dy[ks - i] for i in range(1, p + 1)]
    cols.append(np.ones(ks.size))
    if regression == "ct":
        cols.append(ks.astype(np.float64) + 1.0)
    return np.column_stack(cols), dy[ks]


def adf_test(series, max_lag: int | str = "auto", regression: str = "c", trim: bool = True) -> TestResult:
    """Augmented Dickey-Fuller test.

    With ``max_lag="auto"`` the starting lag is the Schwert bound
    floor(12 (T/100)^0.25), capped so at least 15 regression rows remain.
    When ``trim`` is set, trailing lags with |t| < 1.645 are dropped one at
    a time on a common sample; the chosen order is refit on the full sample.
    """
    if regression not in ("c", "ct"):
        raise ValueError("regression must be 'c' or 'ct'")
    y = _values(series)
    T = y.size
    cap = T - 1 - MIN_OBS
    if cap < 0:
        raise DegenerateInputError(f"ADF needs at least {MIN_OBS + 1} observations, got {T}")
    if max_lag == "auto":
        pmax = min(int(math.floor(12.0 * (T / 100.0) ** 0.25)), cap)
    else:
        pmax = int(max_lag)
        if pmax < 0:
            raise ValueError("max_lag must be >= 0")
        if pmax > cap:
            raise DegenerateInputError(f"lag {pmax} leaves fewer than {MIN_OBS} regression rows")
    p = pmax
    if trim:
        while p > 0:
            A, b = _adf_design(y, p, pmax, regression)
            _, t = _ols_t(A, b)
            if abs(t[p]) >= LAG_TRIM_T:
                break
            p -= 1
    A, b = _adf_design(y, p, p, regression)
    _, t = _ols_t(A, b)
    stat = float(t[0])
    if not math.isfinite(stat):
        raise RankDeficiencyError("ADF statistic is not finite")
    cv = critical_values("adf", regression, b.size)
    return TestResult("adf", stat, cv, p, stat < cv[0.05], int(b.size))


def kpss_test(series, bandwidth: int | str = "auto", regression: str = "c") -> TestResult:
    """KPSS statistic  sum(S_t^2) / (T^2 * lrv)  with a Bartlett-kernel long-run variance."""
    if regression not in ("c", "ct"):
        raise ValueError("regression must be 'c' or 'ct'")
    y = _values(series)
    T = y.size
    if T < MIN_OBS:
        raise DegenerateInputError(f"KPSS needs at least {MIN_OBS} observations, got {T}")
    lag = kpss_bandwidth(T) if bandwidth == "auto" else int(bandwidth)
    if not 0 <= lag < T:
        raise ValueError(f"bandwidth {lag} out of range for {T} observations")
    D = np.ones((T, 1)) if regression == "c" else np.column_stack([np.ones(T), np.arange(1, T + 1.0)])
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    e = y - D @ coef
    scale = max(float(np.max(np.abs(y))), 1.0)
    if float(e @ e) <= (1e-12 * scale) ** 2 * T:
        raise DegenerateInputError("KPSS undefined for a zero-variance series")
    lrv = float(e @ e) / T
    for l in range(1, lag + 1):
        lrv += 2.0 * (1.0 - l / (lag + 1.0)) * float(e[l:] @ e[:-l]) / T
    S = np.cumsum(e)
    stat = float(S @ S) / (T**2 * lrv)
    cv = critical_values("kpss", regression, T)
    return TestResult("kpss", stat, cv, lag, stat > cv[0.05], T)


# --------------------------------------------------------------------------- multicollinearity

def _feature_matrix(features) -> tuple[list[str], np.ndarray]:
    if isinstance(features, Dataset):
        features = features.features
    if isinstance(features, Mapping):
        names = list(features)
        cols = [_values(features[n]) for n in names]
    else:
        feats = list(features)
        names = [f.name for f in feats]
        cols = [f.values for f in feats]
    return names, np.column_stack(cols)


def vif(features) -> dict[str, float]:
    """Variance inflation factor of each feature; exact collinearity maps to ``inf``."""
    names, X = _feature_matrix(features)
    n, k = X.shape
    if k < 2:
        raise DegenerateInputError("VIF needs at least two features")
    if n < k + 2:
        raise DegenerateInputError(f"VIF needs at least {k + 2} rows, got {n}")
    if np.any(X.std(axis=0) == 0):
        raise DegenerateInputError("VIF undefined for a constant feature")
    out = {}
    for j, name in enumerate(names):
        y = X[:, j]
        A = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        unexplained = float(resid @ resid) / ss_tot
        out[name] = math.inf if unexplained <= 1e-12 else 1.0 / unexplained
    return out


# --------------------------------------------------------------------------- stationarization

@dataclass(frozen=True)
class OrderCheck:
    diff_order: int
    adf: TestResult
    kpss: TestResult

    @property
    def stationary(self) -> bool:
        return self.adf.rejected_at_5pct and not self.kpss.rejected_at_5pct


@dataclass(frozen=True)
class ColumnReport:
    column: str
    checks: tuple[OrderCheck, ...]
    decided_diff_order: int
    flagged: bool  # still non-stationary at the cap

    @property
    def adf(self) -> TestResult:
        return self.checks[-1].adf

    @property
    def kpss(self) -> TestResult:
        return self.checks[-1].kpss


@dataclass(frozen=True)
class StationarityReport:
    columns: tuple[ColumnReport, ...] = field(default_factory=tuple)

    @property
    def orders(self) -> dict[str, int]:
        return {c.column: c.decided_diff_order for c in self.columns}

    def records(self) -> list[dict]:
        rows = []
        for c in self.columns:
            for chk in c.checks:
                for res in (chk.adf, chk.kpss):
                    rows.append({
                        "column": c.column,
                        "diff_order": chk.diff_order,
                        "test": res.test,
                        "statistic": round(res.statistic, 10),
                        "cv01": round(res.critical_values[0.01], 10),
                        "cv05": round(res.critical_values[0.05], 10),
                        "cv10": round(res.critical_values[0.10], 10),
                        "lags": res.lags_or_bandwidth,
                        "decision": "stationary" if res.indicates_stationary else "non-stationary",
                    })
        return rows

    def to_json(self) -> str:
        doc = {
            "columns": [
                {"column": c.column, "decided_diff_order": c.decided_diff_order, "flagged": c.flagged}
                for c in self.columns
            ],
            "tests": self.records(),
        }
        return json.dumps(doc, indent=2)

    def format_table(self) -> str:
        lines = [f"{'column':<16}{'d':>3}  {'test':<5}{'stat':>10}{'cv05':>10}{'lags':>6}  decision"]
        for r in self.records():
            lines.append(
                f"{r['column']:<16}{r['diff_order']:>3}  {r['test']:<5}{r['statistic']:>10.4f}"
                f"{r['cv05']:>10.4f}{r['lags']:>6}  {r['decision']}"
            )
        for c in self.columns:
            tail = "  (still non-stationary at cap)" if c.flagged else ""
            lines.append(f"-> {c.column}: difference {c.decided_diff_order} time(s){tail}")
        return "\n".join(lines)


def check_column(series: TimeSeries, max_order: int = 2, regression: str = "c") -> ColumnReport:
    checks = []
    values = series.values
    for d in range(max_order + 1):
        chk = OrderCheck(d, adf_test(values, regression=regression), kpss_test(values, regression=regression))
        checks.append(chk)
        if chk.stationary:
            return ColumnReport(series.name, tuple(checks), d, False)
        if d < max_order:
            values = np.diff(values)
    return ColumnReport(series.name, tuple(checks), max_order, True)


def stationarize(dataset: Dataset, max_order: int = 2, regression: str = "c") -> tuple[Dataset, TransformLedger, StationarityReport]:
    reports = tuple(check_column(c, max_order, regression) for c in dataset.columns)
    report = StationarityReport(reports)
    diffed, ledger = difference_dataset(dataset, report.orders)
    return diffed, ledger, report


def choose_diff_order(values: Sequence[float], max_order: int = 2) -> int:
    """Smallest order passing the combined ADF/KPSS rule (capped)."""
    return check_column(TimeSeries("x", 0, values), max_order).decided_diff_order
