"""Univariate baseline forecasters behind one fit/forecast contract.

Minimum training lengths per kind:

    naive 1, drift 2, ses 3, holt_linear 4, holt_winters 4, theta 4, fft 4,
    arima / sarima  10 + p + q (+ differencing), auto_arima 15
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.signal import lfilter

from .errors import ConvergenceWarning, DegenerateInputError, ForecastError
from .numerics import nelder_mead, ols_solve
from .series import TimeSeries

KINDS = ("naive", "drift", "ses", "holt_linear", "holt_winters", "theta", "fft", "arima", "sarima", "auto_arima")
DISPLAY = {
    "naive": "Naive",
    "drift": "Drift",
    "ses": "SES",
    "holt_linear": "Holt's Linear",
    "holt_winters": "Holt-Winters",
    "theta": "Theta",
    "fft": "FFT",
    "arima": "ARIMA",
    "sarima": "SARIMA",
    "auto_arima": "Auto ARIMA",
}
ROOT_MARGIN = 1.01
PARAM_KEYS = {
    "naive": (),
    "drift": (),
    "ses": ("alpha",),
    "holt_linear": ("alpha", "beta"),
    "holt_winters": ("alpha", "beta"),
    "theta": ("alpha",),
    "fft": ("top_k",),
    "arima": ("order",),
    "sarima": ("order", "seasonal_order"),
    "auto_arima": ("p_max", "q_max", "d_max", "criterion"),
}
_MIN_LEN = {"naive": 1, "drift": 2, "ses": 3, "holt_linear": 4, "holt_winters": 4, "theta": 4, "fft": 4, "auto_arima": 15}


@dataclass(frozen=True)
class UnivariateSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown univariate kind {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))
        unknown = set(self.params) - set(PARAM_KEYS[self.kind])
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {self.kind}: {sorted(unknown)}")
        for key in ("alpha", "beta"):
            v = self.params.get(key)
            if v is None:
                continue
            lo_ok = v > 0 if key == "alpha" else v >= 0
            if not (lo_ok and v <= 1):
                raise ValueError(f"smoothing weight {key}={v} out of range")
        for key in ("order", "seasonal_order"):
            if key in self.params:
                vals = tuple(int(v) for v in self.params[key])
                if any(v < 0 for v in vals):
                    raise ValueError(f"{key} must be non-negative")
                self.params[key] = vals
        if self.kind == "sarima" and self.params.get("seasonal_order", (0, 0, 0, 1))[3] < 1:
            raise ValueError("seasonal period must be >= 1")

    @property
    def label(self) -> str:
        return DISPLAY[self.kind]

    @classmethod
    def arima(cls, p: int, d: int, q: int) -> "UnivariateSpec":
        return cls("arima", {"order": (p, d, q)})

    @classmethod
    def sarima(cls, order, seasonal_order) -> "UnivariateSpec":
        return cls("sarima", {"order": tuple(order), "seasonal_order": tuple(seasonal_order)})


@dataclass(frozen=True)
class FittedUnivariate:
    spec: UnivariateSpec
    state: dict
    residuals: np.ndarray
    sse: float
    aic: float = math.nan
    seed: int = 0
    warnings: tuple[str, ...] = ()

    def forecast(self, horizon: int) -> np.ndarray:
        return forecast(self, horizon)

    def to_dict(self) -> dict:
        return {
            "kind": self.spec.kind,
            "hyperparameters": _jsonable(self.spec.params),
            "learned": _jsonable(self.state),
            "residuals": [float(v) for v in self.residuals],
            "sse": self.sse,
            "aic": None if math.isnan(self.aic) else self.aic,
            "seed": self.seed,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedUnivariate":
        spec = UnivariateSpec(doc["kind"], doc["hyperparameters"])
        aic = math.nan if doc.get("aic") is None else doc["aic"]
        return cls(spec, doc["learned"], np.array(doc["residuals"], dtype=np.float64), doc["sse"], aic, doc["seed"], tuple(doc["warnings"]))


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


# --------------------------------------------------------------------------- smoothing family

def _ses_filter(y: np.ndarray, alpha: float) -> tuple[float, np.ndarray]:
    level = y[0]
    errs = np.empty(y.size - 1)
    for t in range(1, y.size):
        e = y[t] - level
        errs[t - 1] = e
        level += alpha * e
    return float(level), errs


def _holt_filter(y: np.ndarray, alpha: float, beta: float, level: float, trend: float) -> tuple[float, float, np.ndarray]:
    errs = np.empty(y.size - 1)
    for t in range(1, y.size):
        pred = level + trend
        e = y[t] - pred
        errs[t - 1] = e
        new_level = pred + alpha * e
        trend = trend + beta * (new_level - level - trend)
        level = new_level
    return float(level), float(trend), errs


def _grid_then_refine(objective, grids: list[np.ndarray], bounds: list[tuple[float, float]]) -> tuple[np.ndarray, bool]:
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(grids))
    scores = np.array([objective(p) for p in mesh])
    start = mesh[int(np.argmin(scores))]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def clipped(p):
        if np.any(p < lo) or np.any(p > hi):
            return np.inf
        return objective(p)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = nelder_mead(clipped, start, tol=1e-10, max_iter=400)
    return res.x, not any(issubclass(w.category, ConvergenceWarning) for w in caught)


def _fit_ses(y: np.ndarray, params: dict) -> tuple[dict, np.ndarray, list[str]]:
    notes = []
    alpha = params.get("alpha")
    if alpha is None:
        obj = lambda p: float(np.sum(_ses_filter(y, p[0])[1] ** 2))
        best, ok = _grid_then_refine(obj, [np.linspace(0.05, 1.0, 20)], [(1e-4, 1.0)])
        alpha = float(best[0])
        if not ok:
            notes.append("smoothing weight search did not converge")
    level, errs = _ses_filter(y, alpha)
    return {"alpha": alpha, "level": level}, errs, notes


def _holt_init(y: np.ndarray, kind: str) -> tuple[float, float]:
    if kind == "holt_linear":
        return float(y[0]), 0.0
    # holt_winters: classical two-point initialization
    return float(y[0]), float(y[1] - y[0])


def _fit_holt(y: np.ndarray, params: dict, kind: str) -> tuple[dict, np.ndarray, list[str]]:
    notes = []
    l0, b0 = _holt_init(y, kind)
    alpha, beta = params.get("alpha"), params.get("beta")
    free = [name for name, v in (("alpha", alpha), ("beta", beta)) if v is None]
    if free:
        def unpack(p):
            vals = dict(zip(free, p))
            return vals.get("alpha", alpha), vals.get("beta", beta)

        obj = lambda p: float(np.sum(_holt_filter(y, *unpack(p), l0, b0)[2] ** 2))
        grids = [np.linspace(0.05, 1.0, 20) if n == "alpha" else np.linspace(0.0, 1.0, 21) for n in free]
        bounds = [(1e-4, 1.0) if n == "alpha" else (0.0, 1.0) for n in free]
        best, ok = _grid_then_refine(obj, grids, bounds)
        alpha, beta = (float(v) for v in unpack(best))
        if not ok:
            notes.append("smoothing weight search did not converge")
    level, trend, errs = _holt_filter(y, alpha, beta, l0, b0)
    state = {"alpha": alpha, "beta": beta, "level": level, "trend": trend}
    if kind == "holt_winters":
        state["seasonal_weight"] = 0.0
    return state, errs, notes


def _fit_theta(y: np.ndarray, params: dict) -> tuple[dict, np.ndarray, list[str]]:
    t = np.arange(y.size, dtype=np.float64)
    a, b = ols_solve(t, y, intercept=True)
    line2 = 2.0 * y - (a + b * t)
    ses_state, errs, notes = _fit_ses(line2, {"alpha": params.get("alpha")})
    state = {"intercept": float(a), "slope": float(b), "n": int(y.size), "alpha": ses_state["alpha"], "theta2_level": ses_state["level"]}
    # in-sample one-step residuals of the combined forecast
    fitted_line2 = line2[1:] - errs
    combined = 0.5 * (a + b * t[1:]) + 0.5 * fitted_line2
    return state, y[1:] - combined, notes


def _fit_fft(y: np.ndarray, params: dict) -> tuple[dict, np.ndarray, list[str]]:
    n = y.size
    k = int(params.get("top_k", 3))
    t = np.arange(n, dtype=np.float64)
    a, b = ols_solve(t, y, intercept=True)
    resid = y - (a + b * t)
    spec = np.fft.rfft(resid)
    amps = np.abs(spec)
    amps[0] = 0.0
    order = sorted(range(1, amps.size), key=lambda i: (-amps[i], i))[:k]
    comps = []
    for i in order:
        if amps[i] <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
            continue
        scale = 1.0 / n if (n % 2 == 0 and i == n // 2) else 2.0 / n
        comps.append([int(i), float(scale * amps[i]), float(np.angle(spec[i]))])
    state = {"intercept": float(a), "slope": float(b), "n": n, "components": comps}
    return state, y - _fft_curve(state, t), []


def _fft_curve(state: dict, t: np.ndarray) -> np.ndarray:
    n = state["n"]
    out = state["intercept"] + state["slope"] * t
    for freq, amp, phase in state["components"]:
        out = out + amp * np.cos(2.0 * np.pi * freq * t / n + phase)
    return out


# --------------------------------------------------------------------------- ARIMA family

def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def _expand(params: np.ndarray, p: int, q: int, P: int, Q: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Lag-polynomial coefficients: AR as  1 - sum a_i B^i,  MA as  1 + sum b_j B^j."""
    phi = params[:p]
    theta = params[p : p + q]
    sphi = params[p + q : p + q + P]
    stheta = params[p + q + P : p + q + P + Q]
    ar = np.concatenate(([1.0], -phi))
    sar = np.zeros(P * m + 1)
    sar[0] = 1.0
    sar[m::m] = -sphi
    ma = np.concatenate(([1.0], theta))
    sma = np.zeros(Q * m + 1)
    sma[0] = 1.0
    sma[m::m] = stheta
    return _poly_mul(ar, sar), _poly_mul(ma, sma)


def _roots_ok(poly: np.ndarray, margin: float = ROOT_MARGIN) -> bool:
    """True when every root of the lag polynomial has modulus above ``margin``.

    Schur-Cohn step-down on the polynomial rescaled by ``margin``: all
    reflection coefficients must lie strictly inside (-1, 1).
    """
    a = np.asarray(poly, dtype=np.float64) * margin ** np.arange(len(poly))
    for m in range(a.size - 1, 0, -1):
        k = a[m] / a[0]
        if abs(k) >= 1.0:
            return False
        a = (a[:m] - k * a[m:0:-1]) / (1.0 - k * k)
    return True


def _css_residuals(w: np.ndarray, mean: float, ar: np.ndarray, ma: np.ndarray, start: int = 0) -> np.ndarray:
    """Conditional residuals from index max(start, AR order) on, pre-sample errors zero."""
    r = ar.size - 1
    s0 = max(start, r)
    z = w - mean
    u = z[s0:].copy()
    for i in range(1, r + 1):
        u += ar[i] * z[s0 - i : z.size - i]
    return lfilter([1.0], ma, u)


def _apply_differencing(y: np.ndarray, d: int, D: int, m: int) -> tuple[np.ndarray, list[list]]:
    ops = [1] * d + [m] * D
    tails = []
    w = y
    for lag in ops:
        if w.size <= lag:
            raise DegenerateInputError("series too short for the requested differencing")
        tails.append([lag, [float(v) for v in w[-lag:]]])
        w = w[lag:] - w[:-lag]
    return w, tails


def _integrate(path: np.ndarray, tails: list[list]) -> np.ndarray:
    out = path
    for lag, tail in reversed(tails):
        hist = list(tail)
        rebuilt = []
        for v in out:
            val = v + hist[-lag]
            rebuilt.append(val)
            hist.append(val)
        out = np.array(rebuilt)
    return out


def _fit_arima(y: np.ndarray, order, seasonal=(0, 0, 0, 1), condition_on: int = 0) -> tuple[dict, np.ndarray, float, float, list[str]]:
    """CSS fit; ``condition_on`` drops extra leading observations so a grid shares one sample."""
    p, d, q = (int(v) for v in order)
    P, D, Q, m = (int(v) for v in seasonal)
    notes: list[str] = []
    if y.size < 10 + p + q + d + D * m + m * (P + Q):
        raise DegenerateInputError(f"ARIMA{(p, d, q)} needs more than {y.size} observations")
    w, tails = _apply_differencing(y, d, D, m)
    with_mean = (d + D) == 0
    k = p + q + P + Q

    def unpack(theta):
        mean = theta[0] if with_mean else 0.0
        return mean, theta[1:] if with_mean else theta

    def objective(theta):
        mean, coefs = unpack(theta)
        ar, ma = _expand(coefs, p, q, P, Q, m)
        if not (_roots_ok(ar) and _roots_ok(ma)):
            return np.inf
        e = _css_residuals(w, mean, ar, ma, condition_on)
        return float(e @ e)

    x0 = np.zeros(k)
    if p > 0 and w.size > 2 * p + 2:
        lagged = np.column_stack([w[p - i : w.size - i] for i in range(1, p + 1)])
        guess = ols_solve(lagged, w[p:], intercept=True)[1:]
        if _roots_ok(np.concatenate(([1.0], -guess))):
            x0[:p] = guess
    if with_mean:
        x0 = np.concatenate(([float(w.mean())], x0))
    if x0.size == 0:
        params = np.zeros(0)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = nelder_mead(objective, x0, tol=1e-8, max_iter=1000 * max(1, x0.size))
        if any(issubclass(c.category, ConvergenceWarning) for c in caught):
            notes.append("CSS optimizer hit its iteration limit")
        params = res.x
    mean, coefs = unpack(params)
    ar, ma = _expand(coefs, p, q, P, Q, m)
    e = _css_residuals(w, mean, ar, ma, condition_on)
    n_eff = e.size
    sse = float(e @ e)
    sigma2 = max(sse / n_eff, 1e-300)
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
    n_params = k + (1 if with_mean else 0) + 1
    aic = -2.0 * loglik + 2.0 * n_params
    bic = -2.0 * loglik + math.log(n_eff) * n_params
    r = ar.size - 1
    s = ma.size - 1
    state = {
        "order": [p, d, q],
        "seasonal_order": [P, D, Q, m],
        "mean": float(mean),
        "coefficients": [float(v) for v in coefs],
        "ar_poly": [float(v) for v in ar],
        "ma_poly": [float(v) for v in ma],
        "w_tail": [float(v) for v in w[-r:]] if r else [],
        "e_tail": [float(v) for v in e[-s:]] if s else [],
        "diff_tails": tails,
        "n_params": n_params,
        "aic": aic,
        "bic": bic,
    }
    return state, e, sse, aic, notes


def _arima_forecast(state: dict, horizon: int) -> np.ndarray:
    ar = np.asarray(state["ar_poly"])
    ma = np.asarray(state["ma_poly"])
    mean = state["mean"]
    r, s = ar.size - 1, ma.size - 1
    z = [v - mean for v in state["w_tail"]]
    e = list(state["e_tail"]) + [0.0] * horizon
    out = []
    for h in range(horizon):
        val = 0.0
        for i in range(1, r + 1):
            val -= ar[i] * z[len(z) - i]
        for j in range(1, s + 1):
            idx = s + h - j
            if idx < s:
                val += ma[j] * e[idx]
        z.append(val)
        out.append(val + mean)
    return _integrate(np.array(out), state["diff_tails"])


# --------------------------------------------------------------------------- public API

def fit(spec: UnivariateSpec, series, seed: int = 0) -> FittedUnivariate:
    y = _values(series)
    if not np.all(np.isfinite(y)):
        raise DegenerateInputError("series contains non-finite values")
    kind = spec.kind
    if kind in _MIN_LEN and y.size < _MIN_LEN[kind]:
        raise DegenerateInputError(f"{spec.label} needs at least {_MIN_LEN[kind]} observations, got {y.size}")
    p = spec.params
    notes: list[str] = []
    aic = math.nan
    if kind == "naive":
        state, resid = {"last": float(y[-1])}, np.diff(y)
    elif kind == "drift":
        slope = float((y[-1] - y[0]) / (y.size - 1))
        state, resid = {"last": float(y[-1]), "slope": slope}, np.diff(y) - slope
    elif kind == "ses":
        state, resid, notes = _fit_ses(y, p)
    elif kind in ("holt_linear", "holt_winters"):
        state, resid, notes = _fit_holt(y, p, kind)
    elif kind == "theta":
        state, resid, notes = _fit_theta(y, p)
    elif kind == "fft":
        state, resid, notes = _fit_fft(y, p)
    elif kind == "arima":
        state, resid, _, aic, notes = _fit_arima(y, p.get("order", (1, 0, 0)))
    elif kind == "sarima":
        state, resid, _, aic, notes = _fit_arima(y, p.get("order", (1, 0, 0)), p.get("seasonal_order", (0, 0, 0, 1)))
    elif kind == "auto_arima":
        return auto_arima(y, **{k: v for k, v in p.items() if k in ("p_max", "q_max", "d_max", "criterion")}, seed=seed)
    else:  # pragma: no cover - guarded by spec validation
        raise ValueError(kind)
    for msg in notes:
        warnings.warn(f"{spec.label}: {msg}", ConvergenceWarning, stacklevel=2)
    resid = np.asarray(resid, dtype=np.float64)
    return FittedUnivariate(spec, state, resid, float(resid @ resid), aic, seed, tuple(notes))


def forecast(model: FittedUnivariate, horizon: int) -> np.ndarray:
    if int(horizon) != horizon or horizon < 1:
        raise ValueError("horizon must be a positive integer")
    h = np.arange(1, horizon + 1, dtype=np.float64)
    s = model.state
    kind = model.spec.kind
    if kind == "naive":
        return np.full(horizon, s["last"])
    if kind == "drift":
        return s["last"] + h * s["slope"]
    if kind == "ses":
        return np.full(horizon, s["level"])
    if kind in ("holt_linear", "holt_winters"):
        return s["level"] + h * s["trend"]
    if kind == "theta":
        trend = s["intercept"] + s["slope"] * (s["n"] - 1 + h)
        return 0.5 * trend + 0.5 * s["theta2_level"]
    if kind == "fft":
        return _fft_curve(s, s["n"] - 1 + h)
    if kind in ("arima", "sarima"):
        return _arima_forecast(s, horizon)
    if kind == "auto_arima":
        inner = s["selected"]
        if inner["kind"] == "naive":
            return np.full(horizon, inner["last"])
        return _arima_forecast(inner, horizon)
    raise ValueError(kind)


def auto_arima(series, p_max: int = 3, q_max: int = 3, d_max: int = 2, criterion: str = "bic", seed: int = 0) -> FittedUnivariate:
    """Pick d by the combined ADF/KPSS rule, then (p, q) by minimum information criterion.

    All grid points are fitted on one common sample (the first ``p_max``
    differenced values are conditioned away). Ties within 1e-9 prefer fewer
    parameters, then lower q. A constant series, or a grid where every fit
    fails, falls back to Naive.
    """
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    from .stattests import choose_diff_order

    y = _values(series)
    spec = UnivariateSpec("auto_arima", {"p_max": p_max, "q_max": q_max, "d_max": d_max, "criterion": criterion})
    if y.size < _MIN_LEN["auto_arima"]:
        raise DegenerateInputError(f"Auto ARIMA needs at least {_MIN_LEN['auto_arima']} observations")

    def fallback(reason: str) -> FittedUnivariate:
        warnings.warn(f"Auto ARIMA fell back to Naive: {reason}", ConvergenceWarning, stacklevel=3)
        state = {"selected": {"kind": "naive", "last": float(y[-1])}, "criterion": criterion, "grid": []}
        resid = np.diff(y)
        return FittedUnivariate(spec, state, resid, float(resid @ resid), math.nan, seed, (f"fallback to Naive: {reason}",))

    try:
        d = min(choose_diff_order(y, max_order=d_max), d_max)
    except ForecastError as exc:
        return fallback(str(exc))
    candidates = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    state, resid, sse, aic, _ = _fit_arima(y, (p, d, q), condition_on=p_max)
            except ForecastError:
                continue
            score = state[criterion]
            if math.isfinite(score):
                candidates.append((score, p + q, q, p, state, resid, sse))
    if not candidates:
        return fallback("no grid point could be fitted")
    best = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best + 1e-9]
    _, _, q, p, state, resid, sse = min(tied, key=lambda c: (c[1], c[2], c[0]))
    state = dict(state)
    state["kind"] = "arima"
    grid = [{"p": c[3], "d": d, "q": c[2], criterion: c[0]} for c in candidates]
    return FittedUnivariate(spec, {"selected": state, "criterion": criterion, "grid": grid}, resid, sse, state["aic"], seed, ())


def default_specs() -> list[UnivariateSpec]:
    """The ten univariate kinds with the hyperparameters used in evaluation runs."""
    return [
        UnivariateSpec.arima(1, 0, 1),
        UnivariateSpec.sarima((1, 0, 1), (1, 0, 0, 1)),
        UnivariateSpec("auto_arima", {"p_max": 3, "q_max": 3, "d_max": 2}),
        UnivariateSpec("ses"),
        UnivariateSpec("holt_linear"),
        UnivariateSpec("holt_winters"),
        UnivariateSpec("theta"),
        UnivariateSpec("fft", {"top_k": 3}),
        UnivariateSpec("naive"),
        UnivariateSpec("drift"),
    ]
