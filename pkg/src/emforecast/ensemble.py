"""Stacked ensemble over multivariate base models and the recursive future forecaster."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, NonFiniteStepError
from .multivariate import FittedBase, MultivariateSpec, fit_supervised, model_from_dict
from .numerics import ols_solve
from .series import (
    Dataset,
    SupervisedMatrix,
    TimeSeries,
    TransformLedger,
    build_lag_matrix,
    difference_dataset,
    invert_dataset_column,
    lag_features,
)

BASE_KINDS = ("ffnn", "svr", "rfr")
PROTOCOLS = ("walk_forward", "in_sample")
BURN_IN = 30
EXOG_MAX_ORDER = 3


def base_specs(seed: int = 0, overrides: dict | None = None, kinds=BASE_KINDS) -> list[MultivariateSpec]:
    overrides = overrides or {}
    return [MultivariateSpec(k, dict(overrides.get(k, {})), seed) for k in kinds]


@dataclass(frozen=True)
class MetaFeatures:
    years: np.ndarray
    matrix: np.ndarray  # (rows, bases)
    targets: np.ndarray
    protocol: str
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return self.years.size


def _meta_years(sm: SupervisedMatrix, start_year: int, burn_in: int) -> np.ndarray:
    years = sm.row_years[sm.row_years >= start_year + burn_in]
    if years.size == 0:
        raise DegenerateInputError(f"no meta-training rows after a {burn_in}-year burn-in")
    if np.sum(sm.row_years < years[0]) < 2:
        raise DegenerateInputError("burn-in leaves too few rows to fit the base models")
    return years


def build_meta_features(
    specs: list[MultivariateSpec],
    train: Dataset,
    protocol: str = "walk_forward",
    lags: int = 3,
    burn_in: int = BURN_IN,
) -> MetaFeatures:
    """Base-model predictions on the meta window (years at least ``burn_in`` after the start).

    walk_forward refits every base on rows strictly before each meta year;
    in_sample fits once on all of ``train`` (leaks; kept for ablation).
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    sm = build_lag_matrix(train, lags)
    years = _meta_years(sm, train.start_year, burn_in)
    rows = np.stack([sm.row_for_year(int(y)) for y in years])
    targets = np.array([sm.y[sm.row_years == y][0] for y in years])
    M = np.empty((years.size, len(specs)))
    if protocol == "in_sample":
        for j, spec in enumerate(specs):
            M[:, j] = fit_supervised(spec, sm).predict(rows)
    else:
        for i, year in enumerate(years):
            past = sm.before(int(year))
            for j, spec in enumerate(specs):
                M[i, j] = fit_supervised(spec, past).predict_step(rows[i])
    return MetaFeatures(years.copy(), M, targets, protocol, tuple(s.label for s in specs))


@dataclass
class StackEnsemble:
    bases: list[FittedBase]
    intercept: float
    weights: np.ndarray
    meta: MetaFeatures | None = None
    protocol: str = "walk_forward"
    labels: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.size != len(self.bases):
            raise ValueError(f"{self.weights.size} weights for {len(self.bases)} base models")
        if self.meta is not None and self.meta.matrix.shape[1] != len(self.bases):
            raise ValueError("meta-feature width does not match the base count")

    @property
    def width(self) -> int:
        return self.bases[0].width

    def base_predictions(self, X) -> np.ndarray:
        return np.column_stack([b.predict(X) for b in self.bases])

    def combine(self, P) -> np.ndarray:
        return self.intercept + np.asarray(P, dtype=np.float64) @ self.weights

    def predict(self, X) -> np.ndarray:
        return self.combine(self.base_predictions(X))

    def predict_step(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.width:
            raise ValueError(f"ensemble expects {self.width} features, got {x.size}")
        return float(self.predict(x[None, :])[0])

    def meta_mse(self) -> dict[str, float]:
        """In-window MSE of the stack and of each base on the meta window."""
        m = self.meta
        out = {"ensemble": float(np.mean((self.combine(m.matrix) - m.targets) ** 2))}
        for j, label in enumerate(m.labels):
            out[label] = float(np.mean((m.matrix[:, j] - m.targets) ** 2))
        return out

    def to_dict(self) -> dict:
        doc = {"kind": "stack", "protocol": self.protocol, "labels": list(self.labels), "intercept": self.intercept,
               "weights": self.weights.tolist(), "bases": [b.to_dict() for b in self.bases]}
        if self.meta is not None:
            doc["meta"] = {"years": self.meta.years.tolist(), "matrix": self.meta.matrix.tolist(),
                           "targets": self.meta.targets.tolist()}
        return doc

    @classmethod
    def from_dict(cls, doc):
        meta = None
        if "meta" in doc:
            q = doc["meta"]
            meta = MetaFeatures(np.asarray(q["years"]), np.asarray(q["matrix"], dtype=np.float64),
                                np.asarray(q["targets"], dtype=np.float64), doc["protocol"], tuple(doc["labels"]))
        return cls([model_from_dict(b) for b in doc["bases"]], doc["intercept"], doc["weights"], meta,
                   doc["protocol"], tuple(doc["labels"]))


def fit_stack(meta: MetaFeatures, bases: list[FittedBase]) -> StackEnsemble:
    """OLS meta-model with intercept; weights are unconstrained."""
    coef = ols_solve(meta.matrix, meta.targets, intercept=True)
    return StackEnsemble(list(bases), float(coef[0]), coef[1:], meta, meta.protocol, meta.labels)


def predict_stack(ens: StackEnsemble, x) -> float:
    return ens.predict_step(x)


def fit_ensemble(
    specs: list[MultivariateSpec],
    diffed: Dataset,
    lags: int = 3,
    protocol: str = "walk_forward",
    burn_in: int = BURN_IN,
    bases: list[FittedBase] | None = None,
) -> StackEnsemble:
    """Meta features on ``diffed``, then bases fit on all of it (unless already given)."""
    meta = build_meta_features(specs, diffed, protocol, lags, burn_in)
    if bases is None:
        sm = build_lag_matrix(diffed, lags)
        bases = [fit_supervised(s, sm) for s in specs]
    return fit_stack(meta, bases)


# --------------------------------------------------------------------------- exogenous extension

@dataclass(frozen=True)
class ARModel:
    order: int
    coef: np.ndarray  # intercept then lags 1..order
    aic: float

    def step(self, history: np.ndarray) -> float:
        if self.order == 0:
            return float(self.coef[0])
        return float(self.coef[0] + self.coef[1:] @ history[-1 : -self.order - 1 : -1])


def fit_ar_aic(values, max_order: int = EXOG_MAX_ORDER) -> ARModel:
    """AR(p) by OLS, p in 0..max_order chosen by AIC on a common conditioning sample."""
    y = np.asarray(values, dtype=np.float64)
    n = y.size - max_order
    if n < max_order + 3:
        raise DegenerateInputError("series too short for AR order selection")
    target = y[max_order:]
    best = None
    for p in range(max_order + 1):
        X = np.column_stack([y[max_order - l : y.size - l] for l in range(1, p + 1)]) if p else np.zeros((n, 0))
        coef = ols_solve(X, target, intercept=True)
        resid = target - coef[0] - (X @ coef[1:] if p else 0.0)
        sse = max(float(resid @ resid), 1e-300)
        aic = n * math.log(sse / n) + 2.0 * (p + 1)
        if best is None or aic < best.aic - 1e-12:
            best = ARModel(p, coef, aic)
    return best


# --------------------------------------------------------------------------- future path

@dataclass(frozen=True)
class ForecastPath:
    years: np.ndarray
    values: np.ndarray  # level-scale target
    exogenous: dict  # name -> level-scale extended values
    ledger: dict

    def __post_init__(self):
        if self.years.size != self.values.size:
            raise ValueError("years and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteStepError("forecast path contains non-finite values")

    def __len__(self) -> int:
        return self.values.size

    @property
    def horizon(self) -> int:
        return self.values.size

    @property
    def positive(self) -> bool:
        return bool(np.all(self.values > 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("year", "co2_per_capita_t"))
        for y, v in zip(self.years, self.values):
            w.writerow((int(y), f"{v:.3f}"))
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "rows": [{"year": int(y), "co2_per_capita_t": round(float(v), 3)} for y, v in zip(self.years, self.values)],
            "exogenous": {k: [round(float(x), 6) for x in v] for k, v in self.exogenous.items()},
            "ledger": self.ledger,
        }
        return json.dumps(doc, indent=2)


def forecast_future(
    ens: StackEnsemble,
    levels: Dataset,
    ledger: TransformLedger,
    horizon: int = 10,
    lags: int = 3,
    exog_max_order: int = EXOG_MAX_ORDER,
) -> ForecastPath:
    """Recursive one-step forecast past the last observed year.

    Each exogenous differenced column is extended by its own AR model; the
    stack predicts the target difference from the extended lag window; the
    ledger orders invert the whole differenced path to levels.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    diffed, _ = difference_dataset(levels, {n: ledger.order(n) for n in levels.column_names})
    m = diffed.matrix()
    n, k = m.shape
    if n < lags:
        raise DegenerateInputError("not enough history for the lag window")
    ars = [fit_ar_aic(m[:, j], exog_max_order) for j in range(1, k)]
    ext = np.vstack([m, np.zeros((horizon, k))])
    for h in range(horizon):
        t = n + h
        for j, ar in enumerate(ars, start=1):
            ext[t, j] = ar.step(ext[:t, j])
        x = lag_features(ext, t, lags)
        d = ens.predict_step(x)
        if not (math.isfinite(d) and np.all(np.isfinite(ext[t, 1:]))):
            raise NonFiniteStepError(f"non-finite forecast at step {h + 1}", h + 1)
        ext[t, 0] = d
    years = np.arange(levels.end_year + 1, levels.end_year + 1 + horizon)
    out = {}
    for j, name in enumerate(diffed.column_names):
        path = TimeSeries(name, diffed.start_year, ext[:, j])
        out[name] = invert_dataset_column(path, ledger, levels).values[-horizon:]
    target = diffed.column_names[0]
    exog = {name: out[name] for name in diffed.column_names[1:]}
    return ForecastPath(years, out[target], exog, ledger.to_dict())
