"""Multivariate model zoo over the lag-L supervised framing of the differenced data."""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import DegenerateInputError
from ..series import Dataset, SupervisedMatrix, build_lag_matrix
from .base import DEFAULTS, DISPLAY, KINDS, FittedBase, MultivariateSpec, predict_step
from .ffnn import FittedFFNN, fit_ffnn
from .linear import FittedDFM, FittedLinear, FittedVAR, FittedVECM, fit_linear_system, fit_penalized
from .svr import FittedSVR, fit_svr, predict_svr
from .trees import FittedForest, FittedTree, fit_forest, fit_tree

LINEAR_SYSTEMS = ("var", "bvar", "dfm", "vecm")

_LOADERS = {
    "var": FittedVAR,
    "bvar": FittedVAR,
    "dfm": FittedDFM,
    "vecm": FittedVECM,
    "ridge": FittedLinear,
    "elastic_net": FittedLinear,
    "decision_tree": FittedTree,
    "rfr": FittedForest,
    "svr": FittedSVR,
    "ffnn": FittedFFNN,
}


def fit_supervised(spec: MultivariateSpec, sm: SupervisedMatrix) -> FittedBase:
    if spec.kind in ("ridge", "elastic_net"):
        return fit_penalized(spec, sm)
    if spec.kind == "decision_tree":
        return fit_tree(spec, sm)
    if spec.kind == "rfr":
        return fit_forest(spec, sm)
    if spec.kind == "svr":
        return fit_svr(spec, sm)
    if spec.kind == "ffnn":
        return fit_ffnn(spec, sm)
    raise ValueError(f"{spec.kind} is not a supervised-matrix model")


def fit_model(spec: MultivariateSpec, diffed: Dataset, lags: int = 3, levels: Dataset | None = None) -> FittedBase:
    """Fit any zoo member; every kind except VECM then predicts from a lag row of ``diffed``."""
    if spec.kind == "vecm":
        if levels is None:
            raise ValueError("VECM is fit on level data; pass levels=")
        return fit_linear_system(spec, levels)
    if spec.kind in LINEAR_SYSTEMS:
        return fit_linear_system(spec, diffed, row_lags=lags)
    return fit_supervised(spec, build_lag_matrix(diffed, lags))


def model_from_dict(doc: dict) -> FittedBase:
    return _LOADERS[doc["kind"]].from_dict(doc)


def default_specs(seed: int = 0, overrides: dict | None = None) -> list[MultivariateSpec]:
    overrides = overrides or {}
    return [MultivariateSpec(k, dict(overrides.get(k, {})), seed) for k in KINDS]


def grid_search(kind: str, grid: dict, sm: SupervisedMatrix, min_train: int = 20, seed: int = 0) -> tuple[dict, list[dict]]:
    """Expanding-window one-step search over ``sm`` (pass training rows only).

    For each candidate, the model is refit on rows before each evaluation
    year from ``min_train`` onward; the candidate with lowest mean squared
    one-step error wins. Returns (best params, all scores).
    """
    if len(sm) <= min_train:
        raise DegenerateInputError(f"grid search needs more than {min_train} rows, got {len(sm)}")
    keys = sorted(grid)
    scores = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        spec = MultivariateSpec(kind, params, seed)
        errs = []
        for i in range(min_train, len(sm)):
            model = fit_supervised(spec, sm.rows_where(np.arange(len(sm)) < i))
            errs.append(model.predict_step(sm.X[i]) - sm.y[i])
        scores.append({"params": params, "mse": float(np.mean(np.square(errs)))})
    best = min(scores, key=lambda r: r["mse"])
    return best["params"], scores


__all__ = [
    "DEFAULTS", "DISPLAY", "KINDS", "LINEAR_SYSTEMS", "MultivariateSpec", "FittedBase", "FittedVAR", "FittedDFM",
    "FittedVECM", "FittedLinear", "FittedTree", "FittedForest", "FittedSVR", "FittedFFNN", "fit_model",
    "fit_supervised", "fit_linear_system", "fit_penalized", "fit_tree", "fit_forest", "fit_svr", "fit_ffnn",
    "predict_svr", "predict_step", "model_from_dict", "default_specs", "grid_search",
]
