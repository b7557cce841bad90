"""Numerical kernels shared by the estimators.

Random streams are keyed rather than stateful: an ``RngStream`` is an
immutable ``(master_seed, label)`` pair and every call to ``generator()``
starts the same Philox counter sequence. The 128-bit Philox key is derived as

    key[0] = splitmix64(master_seed mod 2**64)
    key[1] = fnv1a64(utf8(label))

so two streams differing only in label never share a key.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ConvergenceWarning, DegenerateInputError, NumericalWarning, RankDeficiencyError

_MASK64 = (1 << 64) - 1
JITTER = 1e-10


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & _MASK64
    return h


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    label: str = "root"

    def key(self) -> np.ndarray:
        return np.array(
            [splitmix64(int(self.master_seed) & _MASK64), fnv1a64(self.label.encode("utf-8"))],
            dtype=np.uint64,
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))

    def child(self, label) -> "RngStream":
        return RngStream(self.master_seed, f"{self.label}/{label}")


# --------------------------------------------------------------------------- least squares

def _with_intercept(X: np.ndarray, intercept: bool) -> np.ndarray:
    if intercept:
        return np.column_stack([np.ones(X.shape[0]), X])
    return X


def ols_solve(X, y, intercept: bool = False) -> np.ndarray:
    """Least-squares coefficients; with ``intercept`` the constant comes first.

    Rank-deficient designs fall back to normal equations with a relative
    ridge jitter of 1e-10 and emit a ``NumericalWarning``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    A = _with_intercept(X, intercept)
    n, p = A.shape
    if y.size != n:
        raise ValueError(f"X has {n} rows but y has {y.size}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in least-squares inputs")
    if n < p:
        raise RankDeficiencyError(f"{n} rows cannot determine {p} coefficients")
    if p == 0:
        return np.zeros(0)
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * max(diag.max(), 1e-300)
    if diag.min() > tol * 1e3:
        return np.linalg.solve(R, Q.T @ y)
    G = A.T @ A
    scale = max(float(np.max(np.diag(G))), 1.0)
    G = G + JITTER * scale * np.eye(p)
    try:
        beta = np.linalg.solve(G, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(str(exc)) from None
    if not np.all(np.isfinite(beta)) or np.linalg.cond(G) > 1e15:
        raise RankDeficiencyError("design is singular beyond jitter tolerance")
    warnings.warn("near-singular least-squares design; applied ridge jitter", NumericalWarning, stacklevel=2)
    return beta


# --------------------------------------------------------------------------- penalized regression

@dataclass(frozen=True)
class PenalizedFit:
    intercept: float
    coef: np.ndarray
    n_iter: int
    converged: bool

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=np.float64) @ self.coef


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zero-mean, unit-variance columns; constant columns are left at zero."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    Z = (X - mean) / safe
    Z[:, std == 0] = 0.0
    return Z, mean, std


def elastic_net(X, y, l1_weight: float = 0.0, l2_weight: float = 0.0, tol: float = 1e-10, max_iter: int = 100_000) -> PenalizedFit:
    """Coordinate descent on  ||yc - Z g||^2 + l1*|g|_1 + l2*|g|^2  over standardized columns Z.

    Coefficients are mapped back to the original column scale on return.
    """
    if l1_weight < 0 or l2_weight < 0:
        raise ValueError("penalty weights must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise DegenerateInputError("empty design")
    Z, mean, std = standardize_columns(X)
    ybar = float(y.mean())
    r = y - ybar
    p = Z.shape[1]
    g = np.zeros(p)
    col_sq = np.einsum("ij,ij->j", Z, Z)
    half_l1 = 0.5 * l1_weight
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_step = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = g[j]
            rho = Z[:, j] @ r + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - half_l1, 0.0) / (col_sq[j] + l2_weight)
            if new != old:
                r -= Z[:, j] * (new - old)
                g[j] = new
                max_step = max(max_step, abs(new - old))
        if max_step < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"elastic net did not converge in {max_iter} sweeps", ConvergenceWarning, stacklevel=2)
    coef = np.where(std > 0, g / np.where(std > 0, std, 1.0), 0.0)
    return PenalizedFit(ybar - float(mean @ coef), coef, it, converged)


# --------------------------------------------------------------------------- derivative-free search

@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool


def nelder_mead(f: Callable[[np.ndarray], float], x0, tol: float = 1e-8, max_iter: int = 2000) -> MinimizeResult:
    """Nelder-Mead simplex search; never returns a point worse than ``x0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    f0 = float(f(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    def safe(x):
        v = float(f(x))
        return v if np.isfinite(v) else np.inf

    res = optimize.minimize(
        safe,
        x0,
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol, "maxiter": max_iter, "maxfev": 4 * max_iter},
    )
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"Nelder-Mead stopped before convergence: {res.message}", ConvergenceWarning, stacklevel=2)
    if not res.fun < f0:
        return MinimizeResult(x0.copy(), f0, int(res.nit), converged)
    return MinimizeResult(np.asarray(res.x, dtype=np.float64), float(res.fun), int(res.nit), converged)


# --------------------------------------------------------------------------- resampling

def bootstrap_sample(n: int, rng: RngStream) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return rng.generator().integers(0, n, size=n)
