"""Spec type, shared fitted-model behaviour and the JSON registry."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("var", "bvar", "vecm", "dfm", "ridge", "elastic_net", "decision_tree", "rfr", "svr", "ffnn")
DISPLAY = {
    "var": "VAR",
    "bvar": "BVAR",
    "vecm": "VECM",
    "dfm": "DFM",
    "ridge": "Ridge Regression",
    "elastic_net": "Elastic Net Regression",
    "decision_tree": "Decision Tree",
    "rfr": "RFR",
    "svr": "SVR",
    "ffnn": "FFNN",
}
DEFAULTS = {
    "var": {"p": 3},
    "bvar": {"p": 3, "shrinkage": 0.2},
    "vecm": {"p": 1},
    "dfm": {"factors": 1},
    "ridge": {"l2": 1.0},
    "elastic_net": {"l1": 0.1, "l2": 0.1},
    "decision_tree": {"max_depth": 4, "min_leaf": 2},
    # m=None resolves to max(1, floor(features / 3)) at fit time
    "rfr": {"n_trees": 200, "m": None, "max_depth": None, "min_leaf": 2, "bootstrap": True},
    "svr": {"kernel": "rbf", "C": 10.0, "epsilon": 0.01, "gamma": None, "tol": 1e-3, "max_passes": 100_000},
    "ffnn": {"hidden": 8, "activation": "tanh", "learning_rate": 0.01, "epochs": 2000},
}


@dataclass(frozen=True)
class MultivariateSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown multivariate kind {self.kind!r}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {self.kind}: {sorted(unknown)}")
        merged = dict(DEFAULTS[self.kind])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        p = merged
        if self.kind == "rfr" and p["n_trees"] < 1:
            raise ValueError("n_trees must be >= 1")
        if self.kind == "svr":
            if p["C"] <= 0:
                raise ValueError("C must be positive")
            if p["epsilon"] < 0:
                raise ValueError("epsilon must be non-negative")
            if p["kernel"] not in ("rbf", "linear"):
                raise ValueError("kernel must be 'rbf' or 'linear'")
        if self.kind == "ffnn":
            if p["hidden"] < 1:
                raise ValueError("hidden must be >= 1")
            if p["epochs"] < 0:
                raise ValueError("epochs must be >= 0")
        if self.kind in ("var", "bvar", "vecm") and p["p"] < 1:
            raise ValueError("lag order must be >= 1")

    @property
    def label(self) -> str:
        return DISPLAY[self.kind]


class FittedBase:
    """Uniform one-step contract: ``predict`` on rows, ``predict_step`` on one row."""

    kind: str = ""
    width: int = 0

    def predict(self, X) -> np.ndarray:  # pragma: no cover - overridden
        raise NotImplementedError

    def predict_step(self, features) -> float:
        x = np.asarray(features, dtype=np.float64).reshape(-1)
        if x.size != self.width:
            raise ValueError(f"{self.kind} expects {self.width} features, got {x.size}")
        return float(self.predict(x[None, :])[0])

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise ValueError(f"{self.kind} expects {self.width} features, got {X.shape[1]}")
        return X


def predict_step(model: FittedBase, features) -> float:
    return model.predict_step(features)


def arr(values) -> list:
    return np.asarray(values, dtype=np.float64).tolist()
