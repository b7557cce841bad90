"""Holdout evaluation of the full model zoo and the stacked ensemble."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import univariate as uni
from .ensemble import BASE_KINDS, StackEnsemble, base_specs, fit_ensemble, forecast_future
from .errors import ForecastError
from .metrics import MetricBundle, RankedRow, evaluate, rank_models, table_to_records
from .multivariate import DISPLAY as MV_DISPLAY, KINDS as MV_KINDS, MultivariateSpec, fit_model
from .series import Dataset, TransformLedger, build_lag_matrix, restore_levels, split
from .stattests import StationarityReport, stationarize

ENSEMBLE = "ensemble"
ALL_MODELS = uni.KINDS + MV_KINDS + (ENSEMBLE,)
NOT_IMPLEMENTED = {"LSTM": "not implemented"}
_FAILURES = (ForecastError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class Prepared:
    levels: Dataset
    diffed: Dataset
    ledger: TransformLedger
    report: StationarityReport


def prepare(levels: Dataset, max_order: int = 2) -> Prepared:
    diffed, ledger, report = stationarize(levels, max_order)
    return Prepared(levels, diffed, ledger, report)


@dataclass
class Outcome:
    key: str
    name: str
    group: str  # univariate | multivariate | ensemble
    predictions: np.ndarray | None = None
    bundle: MetricBundle | None = None
    error: str = ""
    warnings: tuple[str, ...] = ()


@dataclass
class EvaluationResult:
    years: np.ndarray
    actual: np.ndarray
    outcomes: dict[str, Outcome]
    orders: dict[str, int]
    seed: int
    ensemble: StackEnsemble | None = None
    extra: dict = field(default_factory=dict)

    def group_rows(self, group: str) -> list[RankedRow]:
        sel = [o for o in self.outcomes.values() if o.group == group]
        bundles = {o.name: o.bundle for o in sel if o.bundle is not None}
        failures = {o.name: o.error for o in sel if o.bundle is None}
        if group == "multivariate":
            failures.update(NOT_IMPLEMENTED)
        return rank_models(bundles, failures=failures)

    def has_group(self, group: str) -> bool:
        return any(o.group == group for o in self.outcomes.values())

    def summary_rows(self) -> list[RankedRow]:
        bundles = {o.name: o.bundle for o in self.outcomes.values() if o.bundle is not None}
        failures = {o.name: o.error for o in self.outcomes.values() if o.bundle is None}
        return rank_models(bundles, failures=failures)

    def ensemble_rows(self) -> list[RankedRow] | None:
        """Stack versus its three base models."""
        if ENSEMBLE not in self.outcomes:
            return None
        keys = (ENSEMBLE,) + BASE_KINDS
        bundles = {self.outcomes[k].name: self.outcomes[k].bundle for k in keys
                   if k in self.outcomes and self.outcomes[k].bundle is not None}
        failures = {self.outcomes[k].name: self.outcomes[k].error for k in keys
                    if k in self.outcomes and self.outcomes[k].bundle is None}
        return rank_models(bundles, failures=failures)

    def best(self, group: str) -> Outcome | None:
        ok = [o for o in self.outcomes.values() if o.group == group and o.bundle is not None]
        if not ok:
            return None
        return min(ok, key=lambda o: (o.bundle.smape_pct, o.bundle.mae, o.name))

    @property
    def all_failed(self) -> bool:
        return all(o.bundle is None for o in self.outcomes.values())

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "holdout_years": [int(y) for y in self.years],
            "actual": [round(float(v), 10) for v in self.actual],
            "diff_orders": self.orders,
            "summary": table_to_records(self.summary_rows()),
            "predictions": {
                o.name: [round(float(v), 10) for v in o.predictions]
                for o in self.outcomes.values() if o.predictions is not None
            },
            "warnings": {o.name: list(o.warnings) for o in self.outcomes.values() if o.warnings},
        }
        for group in ("univariate", "multivariate"):
            if self.has_group(group):
                doc[group] = table_to_records(self.group_rows(group))
        ens = self.ensemble_rows()
        if ens is not None:
            doc["ensemble"] = table_to_records(ens)
        if self.ensemble is not None:
            doc["meta_model"] = {
                "protocol": self.ensemble.protocol,
                "intercept": round(self.ensemble.intercept, 10),
                "weights": dict(zip(self.ensemble.labels, [round(float(w), 10) for w in self.ensemble.weights])),
                "meta_years": [int(y) for y in self.ensemble.meta.years],
                "meta_mse": {k: round(v, 12) for k, v in self.ensemble.meta_mse().items()},
            }
        doc.update(self.extra)
        return json.dumps(doc, indent=2)


def select_models(include=None, exclude=None) -> list[str]:
    chosen = list(include) if include else list(ALL_MODELS)
    unknown = [m for m in chosen + list(exclude or []) if m not in ALL_MODELS]
    if unknown:
        raise ValueError(f"unknown model key(s): {', '.join(unknown)}; choose from {', '.join(ALL_MODELS)}")
    drop = set(exclude or [])
    return [m for m in ALL_MODELS if m in chosen and m not in drop]


def _run(outcome: Outcome, fn, actual: np.ndarray) -> Outcome:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            preds = np.asarray(fn(), dtype=np.float64)
            if not np.all(np.isfinite(preds)):
                raise ArithmeticError("non-finite predictions")
            outcome.predictions = preds
            outcome.bundle = evaluate(actual, preds)
        except _FAILURES as exc:
            outcome.error = f"{type(exc).__name__}: {exc}"
    outcome.warnings = tuple(dict.fromkeys(str(w.message) for w in caught))
    return outcome


def evaluate_zoo(
    prep: Prepared,
    seed: int = 42,
    test_len: int = 10,
    lags: int = 3,
    models=None,
    overrides: dict | None = None,
) -> EvaluationResult:
    """Fit every selected model on the training window and score the holdout at level scale.

    Univariate models forecast the differenced target ``test_len`` steps
    ahead from the end of training. Multivariate models and the ensemble
    predict one step ahead from observed lags (ex-post), with each predicted
    difference restored to a level from the observed history.
    """
    overrides = overrides or {}
    models = select_models(models)
    levels, diffed = prep.levels, prep.diffed
    target = levels.column_names[0]
    order = prep.ledger.order(target)
    train_d, test_d = split(diffed, test_len)
    years = test_d.years
    y_lev = levels.target.values
    first = levels.year_index(int(years[0]))
    actual = y_lev[first:]
    sm_full = build_lag_matrix(diffed, lags)
    rows = np.stack([sm_full.row_for_year(int(y)) for y in years])

    def one_step_levels(diff_preds):
        out = np.empty(years.size)
        for i, y in enumerate(years):
            t = levels.year_index(int(y))
            out[i] = restore_levels([diff_preds[i]], y_lev[:t], order)[0]
        return out

    outcomes: dict[str, Outcome] = {}
    fitted: dict[str, object] = {}
    for key in models:
        if key in uni.KINDS:
            spec = next(s for s in uni.default_specs() if s.kind == key)
            if key in overrides:
                spec = uni.UnivariateSpec(key, {**spec.params, **overrides[key]})

            def run(spec=spec):
                model = uni.fit(spec, train_d.target, seed)
                path = uni.forecast(model, test_len)
                return restore_levels(path, y_lev[:first], order)

            outcomes[key] = _run(Outcome(key, uni.DISPLAY[key], "univariate"), run, actual)
        elif key in MV_KINDS:
            spec = MultivariateSpec(key, dict(overrides.get(key, {})), seed)

            def run(spec=spec, key=key):
                if key == "vecm":
                    train_lev = levels.window(0, first)
                    model = fit_model(spec, train_d, lags, levels=train_lev)
                    return model.predict_levels(levels, years)
                model = fit_model(spec, train_d, lags)
                fitted[key] = model
                return one_step_levels(model.predict(rows))

            outcomes[key] = _run(Outcome(key, MV_DISPLAY[key], "multivariate"), run, actual)
    ens = None
    if ENSEMBLE in models:
        holder = {}

        def run():
            specs = base_specs(seed, overrides)
            bases = [fitted[k] for k in BASE_KINDS] if all(k in fitted for k in BASE_KINDS) else None
            holder["ens"] = fit_ensemble(specs, train_d, lags, bases=bases)
            return one_step_levels(holder["ens"].predict(rows))

        outcomes[ENSEMBLE] = _run(Outcome(ENSEMBLE, "Ensemble", "ensemble"), run, actual)
        ens = holder.get("ens")
    return EvaluationResult(years, actual, outcomes, prep.report.orders, seed, ens)


def future_forecast(prep: Prepared, seed: int = 42, horizon: int = 10, lags: int = 3, overrides: dict | None = None):
    """Refit the stack on every available year, then forecast ``horizon`` years past the data."""
    ens = fit_ensemble(base_specs(seed, overrides or {}), prep.diffed, lags)
    return ens, forecast_future(ens, prep.levels, prep.ledger, horizon, lags)

