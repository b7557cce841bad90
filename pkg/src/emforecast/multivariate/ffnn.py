"""Single-hidden-layer feedforward network trained by full-batch gradient descent.

Hidden unit k computes u_k = sum_j x_j w_jk + b_k and emits act(u_k); the
output is a linear read-out of the hidden activations. Inputs and target
are standardized internally.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DivergenceError
from ..numerics import RngStream, standardize_columns
from ..series import SupervisedMatrix
from .base import FittedBase, MultivariateSpec, arr

ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "logistic": (lambda u: 1.0 / (1.0 + np.exp(-u)), lambda a: a * (1.0 - a)),
    "relu": (lambda u: np.maximum(u, 0.0), lambda a: (a > 0).astype(np.float64)),
}


def init_weights(n_in: int, hidden: int, rng: RngStream) -> dict:
    gen = rng.generator()
    r1 = math.sqrt(6.0 / (n_in + hidden))
    r2 = math.sqrt(6.0 / (hidden + 1))
    return {
        "W1": gen.uniform(-r1, r1, size=(n_in, hidden)),
        "b1": np.zeros(hidden),
        "W2": gen.uniform(-r2, r2, size=hidden),
        "b2": 0.0,
    }


def forward(w: dict, X: np.ndarray, activation: str = "tanh") -> tuple[np.ndarray, np.ndarray]:
    act, _ = ACTIVATIONS[activation]
    H = act(X @ w["W1"] + w["b1"])
    return H @ w["W2"] + w["b2"], H


def loss_and_grad(w: dict, X: np.ndarray, y: np.ndarray, activation: str = "tanh") -> tuple[float, dict]:
    """Mean squared error and its exact gradient with respect to every weight."""
    _, dact = ACTIVATIONS[activation]
    out, H = forward(w, X, activation)
    r = out - y
    n = y.size
    loss = float(r @ r) / n
    dout = 2.0 * r / n
    dU = np.outer(dout, w["W2"]) * dact(H)
    grad = {"W1": X.T @ dU, "b1": dU.sum(axis=0), "W2": H.T @ dout, "b2": float(dout.sum())}
    return loss, grad


class FittedFFNN(FittedBase):
    kind = "ffnn"

    def __init__(self, params, weights, x_mean, x_std, y_mean, y_std, loss_trace, train_predictions, seed=0):
        self.params = dict(params)
        self.weights = {
            "W1": np.asarray(weights["W1"], dtype=np.float64),
            "b1": np.asarray(weights["b1"], dtype=np.float64),
            "W2": np.asarray(weights["W2"], dtype=np.float64),
            "b2": float(weights["b2"]),
        }
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)
        self.loss_trace = np.asarray(loss_trace, dtype=np.float64)
        self.train_predictions = np.asarray(train_predictions, dtype=np.float64)
        self.seed = seed
        self.width = self.x_mean.size

    def scale(self, X) -> np.ndarray:
        ok = self.x_std > 0
        return np.where(ok, (X - self.x_mean) / np.where(ok, self.x_std, 1.0), 0.0)

    def predict_standardized(self, X) -> np.ndarray:
        X = self._check(X)
        return forward(self.weights, self.scale(X), self.params["activation"])[0]

    def predict(self, X) -> np.ndarray:
        return self.y_mean + self.y_std * self.predict_standardized(X)

    def to_dict(self) -> dict:
        w = {k: (arr(v) if isinstance(v, np.ndarray) else v) for k, v in self.weights.items()}
        return {"kind": "ffnn", "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"weights": w, "x_mean": arr(self.x_mean), "x_std": arr(self.x_std),
                               "y_mean": self.y_mean, "y_std": self.y_std, "loss_trace": arr(self.loss_trace),
                               "train_predictions": arr(self.train_predictions)}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], q["weights"], q["x_mean"], q["x_std"], q["y_mean"], q["y_std"],
                   q["loss_trace"], q["train_predictions"], doc["seed"])


def fit_ffnn(spec: MultivariateSpec, sm: SupervisedMatrix) -> FittedFFNN:
    q = spec.params
    X = np.asarray(sm.X, dtype=np.float64)
    y = np.asarray(sm.y, dtype=np.float64)
    Z, x_mean, x_std = standardize_columns(X)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    t = (y - y_mean) / y_std
    w = init_weights(X.shape[1], int(q["hidden"]), RngStream(spec.seed, "ffnn/init"))
    lr = float(q["learning_rate"])
    trace = []
    for epoch in range(int(q["epochs"])):
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            loss, g = loss_and_grad(w, Z, t, q["activation"])
        if not math.isfinite(loss):
            raise DivergenceError(f"FFNN loss became non-finite at epoch {epoch}", epoch)
        trace.append(loss)
        w["W1"] -= lr * g["W1"]
        w["b1"] -= lr * g["b1"]
        w["W2"] -= lr * g["W2"]
        w["b2"] -= lr * g["b2"]
    out, _ = forward(w, Z, q["activation"])
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"FFNN output non-finite after epoch {int(q['epochs'])}", int(q["epochs"]))
    return FittedFFNN(q, w, x_mean, x_std, y_mean, y_std, trace, y_mean + y_std * out, spec.seed)
