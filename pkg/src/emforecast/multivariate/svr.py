"""Epsilon-insensitive support vector regression solved in the dual.

With beta_i = a_i - a_i* the dual is

    maximize  W(beta) = y.beta - 0.5 beta.K.beta - eps * sum|beta_i|
    subject to  -C <= beta_i <= C,  sum beta_i = 0

and is solved by pairwise coordinate ascent: each step moves one
coefficient up and another down by the same amount, choosing the pair
with the largest directional derivative and maximizing W exactly along
that line.
"""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConvergenceWarning
from ..numerics import standardize_columns
from ..series import SupervisedMatrix
from .base import FittedBase, MultivariateSpec, arr


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def dual_objective(beta: np.ndarray, K: np.ndarray, y: np.ndarray, eps: float) -> float:
    return float(y @ beta - 0.5 * beta @ K @ beta - eps * np.sum(np.abs(beta)))


def _line_max(bi, bj, gi, gj, eta, eps, C):
    """Best step t >= 0 for (beta_i + t, beta_j - t)."""
    t_hi = min(C - bi, bj + C)
    if t_hi <= 0.0:
        return 0.0
    cuts = sorted({0.0, t_hi} | {c for c in (-bi, bj) if 0.0 < c < t_hi})

    def value(t):
        return t * (gi - gj) - 0.5 * eta * t * t - eps * (abs(bi + t) + abs(bj - t))

    best_t, best_v = 0.0, value(0.0)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        si = 1.0 if bi + mid > 0 else -1.0
        sj = 1.0 if bj - mid > 0 else -1.0
        slope0 = (gi - gj) - eps * (si - sj)
        cands = [lo, hi]
        if eta > 1e-12:
            cands.append(min(max(slope0 / eta, lo), hi))
        for t in cands:
            v = value(t)
            if v > best_v:
                best_t, best_v = t, v
    return best_t


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, eps: float, tol: float = 1e-3, max_iter: int = 100_000):
    """Returns (beta, bias, iterations, converged)."""
    n = y.size
    beta = np.zeros(n)
    G = y.astype(np.float64).copy()  # y - K beta
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        up = np.where(beta >= 0, G - eps, G + eps)
        up[beta >= C] = -np.inf
        down = np.where(beta > 0, -G + eps, -G - eps)
        down[beta <= -C] = -np.inf
        i = int(np.argmax(up))
        down_i = down[i]
        down[i] = -np.inf
        j = int(np.argmax(down))
        down[i] = down_i
        if up[i] + down[j] < tol:
            converged = True
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = _line_max(beta[i], beta[j], G[i], G[j], eta, eps, C)
        if t <= 0.0:
            converged = True
            break
        beta[i] = min(beta[i] + t, C)
        beta[j] = max(beta[j] - t, -C)
        G -= t * (K[:, i] - K[:, j])
    return beta, _bias(beta, G, C, eps), it, converged


def _bias(beta, G, C, eps) -> float:
    bound = 1e-8 * max(C, 1.0)
    pos = (beta > bound) & (beta < C - bound)
    neg = (beta < -bound) & (beta > -C + bound)
    free = np.concatenate([G[pos] - eps, G[neg] + eps])
    if free.size:
        return float(np.mean(free))
    lows, highs = [-np.inf], [np.inf]
    zero = np.abs(beta) <= bound
    lows += list(G[zero] - eps)
    highs += list(G[zero] + eps)
    highs += list(G[beta >= C - bound] - eps)
    lows += list(G[beta <= -C + bound] + eps)
    lo, hi = max(lows), min(highs)
    if np.isfinite(lo) and np.isfinite(hi):
        return float(0.5 * (lo + hi))
    return float(lo if np.isfinite(lo) else hi)


class FittedSVR(FittedBase):
    kind = "svr"

    def __init__(self, params, x_mean, x_std, support, dual_coef, bias, gamma, converged=True, seed=0):
        self.params = dict(params)
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)
        self.support = np.asarray(support, dtype=np.float64).reshape(-1, self.x_mean.size)
        self.dual_coef = np.asarray(dual_coef, dtype=np.float64)
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.converged = bool(converged)
        self.seed = seed
        self.width = self.x_mean.size

    @property
    def C(self) -> float:
        return float(self.params["C"])

    @property
    def epsilon(self) -> float:
        return float(self.params["epsilon"])

    def scale(self, X) -> np.ndarray:
        ok = self.x_std > 0
        return np.where(ok, (X - self.x_mean) / np.where(ok, self.x_std, 1.0), 0.0)

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        if self.dual_coef.size == 0:
            return np.full(X.shape[0], self.bias)
        K = kernel_matrix(self.scale(X), self.support, self.params["kernel"], self.gamma)
        return K @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {"kind": "svr", "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"x_mean": arr(self.x_mean), "x_std": arr(self.x_std), "support": arr(self.support),
                               "dual_coef": arr(self.dual_coef), "bias": self.bias, "gamma": self.gamma,
                               "converged": self.converged}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], q["x_mean"], q["x_std"], q["support"], q["dual_coef"], q["bias"],
                   q["gamma"], q["converged"], doc["seed"])


def fit_svr(spec: MultivariateSpec, sm: SupervisedMatrix, keep_all: bool = False) -> FittedSVR:
    q = spec.params
    X = np.asarray(sm.X, dtype=np.float64)
    y = np.asarray(sm.y, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("SVR inputs must be finite")
    Z, mean, std = standardize_columns(X)
    gamma = float(q["gamma"]) if q["gamma"] is not None else 1.0 / X.shape[1]
    K = kernel_matrix(Z, Z, q["kernel"], gamma)
    beta, bias, _, converged = solve_dual(K, y, float(q["C"]), float(q["epsilon"]), float(q["tol"]), int(q["max_passes"]))
    if not converged:
        warnings.warn("SVR dual solver stopped at its iteration limit", ConvergenceWarning, stacklevel=2)
    keep = np.ones(beta.size, bool) if keep_all else np.abs(beta) > 0.0
    return FittedSVR(q, mean, std, Z[keep], beta[keep], bias, gamma, converged, spec.seed)


def predict_svr(model: FittedSVR, x) -> float:
    return model.predict_step(x)
