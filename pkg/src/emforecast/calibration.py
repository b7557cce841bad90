"""Monte-Carlo generation of ADF / KPSS critical values.

The embedded table in ``data/critical_values.json`` is produced by
``scripts/regenerate_critical_values.py`` through ``simulate_table`` below;
``cmd_calibrate`` re-simulates under a different seed and reports drift.
"""
from __future__ import annotations

import json
from importlib import resources
from typing import Iterable

import numpy as np

from .numerics import RngStream

LEVELS = (0.01, 0.05, 0.10)
SAMPLE_SIZES = (50, 100, 250, 500)
REGRESSIONS = ("c", "ct")
TESTS = ("adf", "kpss")
DEFAULT_REPLICATIONS = 100_000
_CHUNK = 10_000


def kpss_bandwidth(nobs: int) -> int:
    return int(np.floor(4.0 * (nobs / 100.0) ** 0.25))


def _trend_basis(n: int, regression: str) -> np.ndarray:
    if regression == "c":
        return np.ones((n, 1))
    if regression == "ct":
        return np.column_stack([np.ones(n), np.arange(1, n + 1, dtype=np.float64)])
    raise ValueError(f"unknown regression {regression!r}")


def _detrend(rows: np.ndarray, regression: str) -> np.ndarray:
    """Residuals of each row regressed on the deterministic terms."""
    Q, _ = np.linalg.qr(_trend_basis(rows.shape[1], regression))
    return rows - (rows @ Q) @ Q.T


def df_tau(levels: np.ndarray, regression: str) -> np.ndarray:
    """Dickey-Fuller t-ratio (no augmentation) for each row of ``levels``."""
    dy = np.diff(levels, axis=1)
    ylag = levels[:, :-1]
    n = dy.shape[1]
    x = _detrend(ylag, regression)
    yy = _detrend(dy, regression)
    sxx = np.einsum("ij,ij->i", x, x)
    b = np.einsum("ij,ij->i", x, yy) / sxx
    resid = yy - b[:, None] * x
    dof = n - 1 - (1 if regression == "c" else 2)
    s2 = np.einsum("ij,ij->i", resid, resid) / dof
    return b / np.sqrt(s2 / sxx)


def kpss_stat(series: np.ndarray, regression: str, bandwidth: int | None = None) -> np.ndarray:
    n = series.shape[1]
    lag = kpss_bandwidth(n) if bandwidth is None else bandwidth
    e = _detrend(series, regression)
    s = np.cumsum(e, axis=1)
    lrv = np.einsum("ij,ij->i", e, e) / n
    for l in range(1, lag + 1):
        w = 1.0 - l / (lag + 1.0)
        lrv += 2.0 * w * np.einsum("ij,ij->i", e[:, l:], e[:, :-l]) / n
    return np.einsum("ij,ij->i", s, s) / (n**2 * lrv)


def simulate_statistics(test: str, regression: str, nobs: int, replications: int, rng: RngStream) -> np.ndarray:
    """Null-distribution draws; ``nobs`` is the regression sample size."""
    gen = rng.generator()
    out = np.empty(replications)
    done = 0
    while done < replications:
        m = min(_CHUNK, replications - done)
        if test == "adf":
            eps = gen.standard_normal((m, nobs + 1))
            out[done : done + m] = df_tau(np.cumsum(eps, axis=1), regression)
        elif test == "kpss":
            out[done : done + m] = kpss_stat(gen.standard_normal((m, nobs)), regression)
        else:
            raise ValueError(f"unknown test {test!r}")
        done += m
    return out


def critical_from_draws(test: str, draws: np.ndarray) -> dict[float, float]:
    if test == "adf":
        return {a: float(np.quantile(draws, a)) for a in LEVELS}
    return {a: float(np.quantile(draws, 1.0 - a)) for a in LEVELS}


def simulate_table(
    seed: int,
    replications: int = DEFAULT_REPLICATIONS,
    sample_sizes: Iterable[int] = SAMPLE_SIZES,
) -> dict:
    root = RngStream(seed, "critical-values")
    table: dict = {"meta": {"seed": seed, "replications": replications, "sample_sizes": list(sample_sizes)}}
    for test in TESTS:
        table[test] = {}
        for reg in REGRESSIONS:
            table[test][reg] = {}
            for T in sample_sizes:
                draws = simulate_statistics(test, reg, T, replications, root.child(f"{test}/{reg}/{T}"))
                table[test][reg][str(T)] = {f"{a:.2f}": round(v, 4) for a, v in critical_from_draws(test, draws).items()}
    return table


def load_embedded_table() -> dict:
    text = resources.files("emforecast").joinpath("data/critical_values.json").read_text(encoding="utf-8")
    return json.loads(text)


def interpolate_critical_values(table: dict, test: str, regression: str, nobs: int) -> dict[float, float]:
    """Piecewise-linear interpolation in 1/T between the tabulated sample sizes.

    Outside the grid the nearest segment is extended linearly in 1/T, which
    is the leading term of the usual response-surface form.
    """
    grid = table[test][regression]
    sizes = sorted(int(k) for k in grid)
    inv = np.array([1.0 / s for s in sizes])
    x = 1.0 / max(int(nobs), 1)
    out = {}
    for a in LEVELS:
        vals = np.array([grid[str(s)][f"{a:.2f}"] for s in sizes])
        order = np.argsort(inv)
        xi, vi = inv[order], vals[order]
        if x <= xi[0]:
            lo, hi = 0, 1
        elif x >= xi[-1]:
            lo, hi = len(xi) - 2, len(xi) - 1
        else:
            hi = int(np.searchsorted(xi, x))
            lo = hi - 1
        slope = (vi[hi] - vi[lo]) / (xi[hi] - xi[lo])
        out[a] = float(vi[lo] + slope * (x - xi[lo]))
    return out


def compare_tables(simulated: dict, embedded: dict) -> list[dict]:
    rows = []
    for test in TESTS:
        for reg in REGRESSIONS:
            for T, levels in simulated[test][reg].items():
                for a, v in levels.items():
                    ref = embedded[test][reg][T][a]
                    rows.append(
                        {"test": test, "regression": reg, "T": int(T), "level": float(a),
                         "simulated": v, "embedded": ref, "deviation": round(abs(v - ref), 4)}
                    )
    return rows
