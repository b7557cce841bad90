"""Linear-system forecasters (VAR, BVAR, DFM, VECM) and penalized regressions."""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import DegenerateInputError, NumericalWarning
from ..numerics import elastic_net, ols_solve
from ..series import Dataset, SupervisedMatrix
from .base import FittedBase, MultivariateSpec, arr


def _row_index(n_cols: int, row_lags: int, p: int) -> np.ndarray:
    """Positions of lags 1..p of every column inside a lag row built with ``row_lags``."""
    return np.array([j * row_lags + l for j in range(n_cols) for l in range(p)], dtype=np.int64)


def _var_design(m: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    n, k = m.shape
    X = np.column_stack([m[p - l : n - l, j] for j in range(k) for l in range(1, p + 1)])
    return X, m[p:]


def _warn_thin(n_rows: int, n_params: int, name: str) -> None:
    if n_rows < 2 * n_params:
        warnings.warn(f"{name}: {n_rows} rows for {n_params} parameters per equation", NumericalWarning, stacklevel=3)


class FittedVAR(FittedBase):
    def __init__(self, kind, params, names, p, row_lags, coef, seed=0):
        self.kind = kind
        self.params = dict(params)
        self.names = tuple(names)
        self.p = int(p)
        self.row_lags = int(row_lags)
        self.coef = np.asarray(coef, dtype=np.float64)  # (equations, 1 + k*p), intercept first
        self.seed = seed
        self.width = len(self.names) * self.row_lags
        self._idx = _row_index(len(self.names), self.row_lags, self.p)

    @property
    def lag_matrices(self) -> np.ndarray:
        """(p, k, k) array A_l with y_t = c + sum_l A_l y_{t-l}."""
        k = len(self.names)
        slopes = self.coef[:, 1:].reshape(k, k, self.p)  # eq, column, lag
        return np.transpose(slopes, (2, 0, 1))

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return self.coef[0, 0] + X[:, self._idx] @ self.coef[0, 1:]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"names": list(self.names), "p": self.p, "row_lags": self.row_lags, "coef": arr(self.coef)}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["kind"], doc["hyperparameters"], q["names"], q["p"], q["row_lags"], q["coef"], doc["seed"])


def fit_var(dataset: Dataset, p: int = 3, row_lags: int | None = None, spec: MultivariateSpec | None = None) -> FittedVAR:
    m = dataset.matrix()
    n, k = m.shape
    if n <= p + 1:
        raise DegenerateInputError(f"VAR({p}) needs more than {p + 1} rows")
    X, Y = _var_design(m, p)
    _warn_thin(X.shape[0], 1 + k * p, "VAR")
    coef = np.stack([ols_solve(X, Y[:, i], intercept=True) for i in range(k)])
    params = spec.params if spec else {"p": p}
    return FittedVAR("var", params, dataset.column_names, p, row_lags or p, coef, spec.seed if spec else 0)


def fit_bvar(dataset: Dataset, p: int = 3, shrinkage: float = 0.2, row_lags: int | None = None, spec: MultivariateSpec | None = None) -> FittedVAR:
    """Ridge shrinkage of every equation toward a random-walk prior (own first lag 1, rest 0).

    Per equation minimizes  ||y - c - X b||^2 / n + shrinkage * sum_j var(x_j) (b_j - b0_j)^2,
    so the penalty is invariant to regressor scale.
    """
    if shrinkage < 0:
        raise ValueError("shrinkage must be non-negative")
    m = dataset.matrix()
    n, k = m.shape
    if n <= p + 1:
        raise DegenerateInputError(f"BVAR({p}) needs more than {p + 1} rows")
    X, Y = _var_design(m, p)
    rows = X.shape[0]
    xm = X.mean(axis=0)
    Xc = X - xm
    S2 = np.diag(Xc.var(axis=0))
    G = Xc.T @ Xc / rows + shrinkage * S2
    if np.linalg.matrix_rank(G) < G.shape[0]:
        G = G + 1e-10 * max(1.0, float(np.max(np.diag(G)))) * np.eye(G.shape[0])
        warnings.warn("BVAR normal matrix singular; applied jitter", NumericalWarning, stacklevel=2)
    coef = np.zeros((k, 1 + k * p))
    for i in range(k):
        prior = np.zeros(k * p)
        prior[i * p] = 1.0
        y = Y[:, i]
        b = np.linalg.solve(G, Xc.T @ (y - y.mean()) / rows + shrinkage * S2 @ prior)
        coef[i, 0] = y.mean() - xm @ b
        coef[i, 1:] = b
    params = spec.params if spec else {"p": p, "shrinkage": shrinkage}
    fitted = FittedVAR("bvar", params, dataset.column_names, p, row_lags or p, coef, spec.seed if spec else 0)
    return fitted


class FittedDFM(FittedBase):
    kind = "dfm"

    def __init__(self, params, names, row_lags, feat_mean, feat_std, loadings, factor_ar, coef, seed=0):
        self.params = dict(params)
        self.names = tuple(names)
        self.row_lags = int(row_lags)
        self.feat_mean = np.asarray(feat_mean, dtype=np.float64)
        self.feat_std = np.asarray(feat_std, dtype=np.float64)
        self.loadings = np.asarray(loadings, dtype=np.float64)  # (k_features, factors)
        self.factor_ar = np.asarray(factor_ar, dtype=np.float64)  # (factors, 2): intercept, phi
        self.coef = np.asarray(coef, dtype=np.float64)  # intercept + factors * row_lags
        self.seed = seed
        self.width = len(self.names) * self.row_lags

    def factors_of(self, feature_values) -> np.ndarray:
        z = (np.asarray(feature_values, dtype=np.float64) - self.feat_mean) / self.feat_std
        return z @ self.loadings

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        L = self.row_lags
        k_feat = len(self.names) - 1
        # feature lag l sits at column (1 + j) * L + (l - 1)
        lagged = [self.factors_of(np.column_stack([X[:, (1 + j) * L + l] for j in range(k_feat)])) for l in range(L)]
        design = np.column_stack([np.ones(X.shape[0])] + [f[:, i] for i in range(self.loadings.shape[1]) for f in lagged])
        return design @ self.coef

    def to_dict(self) -> dict:
        return {"kind": "dfm", "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"names": list(self.names), "row_lags": self.row_lags, "feat_mean": arr(self.feat_mean),
                               "feat_std": arr(self.feat_std), "loadings": arr(self.loadings),
                               "factor_ar": arr(self.factor_ar), "coef": arr(self.coef)}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], q["names"], q["row_lags"], q["feat_mean"], q["feat_std"],
                   q["loadings"], q["factor_ar"], q["coef"], doc["seed"])


def fit_dfm(dataset: Dataset, factors: int = 1, row_lags: int = 3, spec: MultivariateSpec | None = None) -> FittedDFM:
    """Principal-component factors of the standardized features; target regressed on factor lags."""
    F = np.column_stack([f.values for f in dataset.features])
    if F.shape[1] < factors:
        raise DegenerateInputError("more factors than features")
    mean, std = F.mean(axis=0), F.std(axis=0)
    if np.any(std == 0):
        raise DegenerateInputError("DFM needs non-constant features")
    Z = (F - mean) / std
    _, _, vt = np.linalg.svd(Z, full_matrices=False)
    load = vt[:factors].T.copy()
    for i in range(factors):
        if load[:, i].sum() < 0:
            load[:, i] = -load[:, i]
    f = Z @ load
    n = f.shape[0]
    if n <= row_lags + 2:
        raise DegenerateInputError("DFM needs more rows than factor lags")
    ar = np.stack([ols_solve(f[:-1, i], f[1:, i], intercept=True) for i in range(factors)])
    y = dataset.target.values[row_lags:]
    design = np.column_stack([f[row_lags - l : n - l, i] for i in range(factors) for l in range(1, row_lags + 1)])
    coef = ols_solve(design, y, intercept=True)
    params = spec.params if spec else {"factors": factors}
    return FittedDFM(params, dataset.column_names, row_lags, mean, std, load, ar, coef, spec.seed if spec else 0)


class FittedVECM(FittedBase):
    """Engle-Granger error-correction model on level data.

    Rows for ``predict`` are ``[u_{t-1}, d(col_j)_{t-l} for j, l=1..p]`` with
    u the cointegrating residual; the output is the predicted first
    difference of the target level.
    """

    kind = "vecm"

    def __init__(self, params, names, p, beta, gamma, seed=0):
        self.params = dict(params)
        self.names = tuple(names)
        self.p = int(p)
        self.beta = np.asarray(beta, dtype=np.float64)  # intercept + feature slopes
        self.gamma = np.asarray(gamma, dtype=np.float64)  # intercept, alpha, short-run lags
        self.seed = seed
        self.width = 1 + len(self.names) * self.p

    def equilibrium_error(self, levels: np.ndarray) -> np.ndarray:
        levels = np.atleast_2d(levels)
        return levels[:, 0] - self.beta[0] - levels[:, 1:] @ self.beta[1:]

    def design(self, levels: np.ndarray, t_index: np.ndarray) -> np.ndarray:
        """Rows for target indices ``t_index`` of a (n, k) level matrix."""
        u = self.equilibrium_error(levels)
        d = np.diff(levels, axis=0)  # d[t-1] = level[t] - level[t-1]
        rows = []
        for t in t_index:
            lags = [d[t - 1 - l, j] for j in range(levels.shape[1]) for l in range(1, self.p + 1)]
            rows.append([u[t - 1]] + lags)
        return np.array(rows, dtype=np.float64).reshape(len(t_index), self.width)

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return self.gamma[0] + X @ self.gamma[1:]

    def predict_levels(self, levels: Dataset, years) -> np.ndarray:
        m = levels.matrix()
        idx = np.array([levels.year_index(y) for y in years], dtype=np.int64)
        if np.any(idx < self.p + 1):
            raise DegenerateInputError("VECM needs p + 1 years of history before each prediction")
        return m[idx - 1, 0] + self.predict(self.design(m, idx))

    def to_dict(self) -> dict:
        return {"kind": "vecm", "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"names": list(self.names), "p": self.p, "beta": arr(self.beta), "gamma": arr(self.gamma)}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], q["names"], q["p"], q["beta"], q["gamma"], doc["seed"])


def fit_vecm(levels: Dataset, p: int = 1, spec: MultivariateSpec | None = None) -> FittedVECM:
    m = levels.matrix()
    n, k = m.shape
    if n <= p + 3:
        raise DegenerateInputError("VECM needs more observations than lags")
    beta = ols_solve(m[:, 1:], m[:, 0], intercept=True)
    params = spec.params if spec else {"p": p}
    model = FittedVECM(params, levels.column_names, p, beta, np.zeros(1 + 1 + k * p), spec.seed if spec else 0)
    t_index = np.arange(p + 1, n)
    X = model.design(m, t_index)
    target = m[t_index, 0] - m[t_index - 1, 0]
    _warn_thin(X.shape[0], X.shape[1] + 1, "VECM")
    model.gamma = ols_solve(X, target, intercept=True)
    return model


def fit_linear_system(spec: MultivariateSpec, dataset: Dataset, row_lags: int = 3):
    """VAR/BVAR/DFM consume the differenced aligned dataset; VECM consumes levels."""
    q = spec.params
    if spec.kind == "var":
        return fit_var(dataset, q["p"], row_lags, spec)
    if spec.kind == "bvar":
        return fit_bvar(dataset, q["p"], q["shrinkage"], row_lags, spec)
    if spec.kind == "dfm":
        return fit_dfm(dataset, q["factors"], row_lags, spec)
    if spec.kind == "vecm":
        return fit_vecm(dataset, q["p"], spec)
    raise ValueError(f"{spec.kind} is not a linear-system model")


class FittedLinear(FittedBase):
    def __init__(self, kind, params, intercept, coef, converged=True, seed=0):
        self.kind = kind
        self.params = dict(params)
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.converged = bool(converged)
        self.seed = seed
        self.width = self.coef.size

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return self.intercept + X @ self.coef

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"intercept": self.intercept, "coef": arr(self.coef), "converged": self.converged}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["kind"], doc["hyperparameters"], q["intercept"], q["coef"], q["converged"], doc["seed"])


def fit_penalized(spec: MultivariateSpec, sm: SupervisedMatrix) -> FittedLinear:
    if len(sm) == 0:
        raise DegenerateInputError("empty supervised matrix")
    q = spec.params
    l1 = 0.0 if spec.kind == "ridge" else float(q["l1"])
    res = elastic_net(sm.X, sm.y, l1, float(q["l2"]))
    return FittedLinear(spec.kind, q, res.intercept, res.coef, res.converged, spec.seed)
