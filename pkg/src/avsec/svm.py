"""One-vs-rest linear SVM trained in the primal.

Each binary subproblem minimizes 0.5 * ||w||^2 + C * sum_i loss(1 - y_i z_i)
with z = w.x + b over the bias-augmented weight vector (the bias column is
regularized like every other coordinate). The default squared-hinge loss is
solved with a Newton-CG method using the generalized Hessian restricted to
margin violators, plus a backtracking line search, so the objective decreases
monotonically at every outer iteration and the solve is fully deterministic.

A plain-hinge variant is exposed behind ``loss="hinge"``; it runs a
deterministic subgradient descent with a 1/t step schedule and returns the
best iterate seen (no per-step descent guarantee).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (n_classes, dim), bias excluded
    biases: np.ndarray  # (n_classes,)
    C: float
    classes: np.ndarray  # original label values, ascending
    loss: str = "squared_hinge"

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise NumericError("SVM model has non-finite parameters")
        if len(self.classes) < 2:
            raise DataError("SVM model needs at least 2 classes")

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.weights.shape[1]:
            raise DataError(
                f"model expects {self.weights.shape[1]}-dim inputs, got {X.shape[1]}-dim"
            )
        return X @ self.weights.T + self.biases


def squared_hinge_objective(w: np.ndarray, Xa: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = 1.0 - y * (Xa @ w)
    viol = np.maximum(margins, 0.0)
    return 0.5 * float(w @ w) + C * float(viol @ viol)


def _solve_squared_hinge(
    Xa: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = 1e-8,
    max_newton: int = 60,
    max_cg: int = 250,
    trace: list | None = None,
) -> np.ndarray:
    """Newton-CG with backtracking line search on the primal squared hinge."""
    n, d = Xa.shape
    w = np.zeros(d)
    obj = squared_hinge_objective(w, Xa, y, C)
    if trace is not None:
        trace.append(obj)
    grad0_norm = None
    for _ in range(max_newton):
        z = Xa @ w
        margins = 1.0 - y * z
        active = margins > 0.0
        grad = w - 2.0 * C * (Xa.T @ (np.where(active, y * margins, 0.0)))
        gnorm = float(np.linalg.norm(grad))
        if grad0_norm is None:
            grad0_norm = gnorm
        if gnorm <= tol * max(1.0, grad0_norm):
            break

        Xact = Xa[active]

        def hess_vec(v: np.ndarray) -> np.ndarray:
            return v + 2.0 * C * (Xact.T @ (Xact @ v))

        # CG on H d = -grad
        direction = np.zeros(d)
        r = -grad.copy()
        p = r.copy()
        rs = float(r @ r)
        cg_tol = max(1e-12, 1e-4 * rs)
        for _ in range(max_cg):
            Hp = hess_vec(p)
            alpha = rs / float(p @ Hp)
            direction += alpha * p
            r -= alpha * Hp
            rs_new = float(r @ r)
            if rs_new <= cg_tol:
                break
            p = r + (rs_new / rs) * p
            rs = rs_new

        # backtracking: Armijo with sigma = 0.01
        slope = float(grad @ direction)
        if slope >= 0:  # CG failed to produce a descent direction; fall back
            direction = -grad
            slope = -gnorm**2
        step = 1.0
        for _ in range(60):
            new_w = w + step * direction
            new_obj = squared_hinge_objective(new_w, Xa, y, C)
            if new_obj <= obj + 0.01 * step * slope:
                break
            step *= 0.5
        else:
            break  # no further progress possible at floating-point resolution
        w, obj = new_w, new_obj
        if trace is not None:
            trace.append(obj)
    return w


def _solve_hinge(Xa: np.ndarray, y: np.ndarray, C: float, iters: int = 2000) -> np.ndarray:
    n, d = Xa.shape
    w = np.zeros(d)
    best_w, best_obj = w.copy(), np.inf
    lr0 = 1.0 / (1.0 + 2.0 * C)
    for t in range(1, iters + 1):
        margins = 1.0 - y * (Xa @ w)
        active = margins > 0.0
        sub = w - C * (Xa.T @ np.where(active, y, 0.0))
        w = w - (lr0 / t) * sub
        obj = 0.5 * float(w @ w) + C * float(np.maximum(margins, 0.0).sum())
        if obj < best_obj:
            best_obj, best_w = obj, w.copy()
    return best_w


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 35.0,
    loss: str = "squared_hinge",
    tol: float = 1e-8,
) -> LinearSvmModel:
    """Train a one-vs-rest linear SVM; deterministic for fixed inputs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError("X must be (n, d) with one label per row")
    if X.shape[0] < 2:
        raise DataError("need at least 2 training points")
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain NaN/Inf")
    if loss not in ("squared_hinge", "hinge"):
        raise DataError(f"unknown loss {loss!r}")
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("training labels contain a single class")

    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    weights = np.empty((classes.size, X.shape[1]))
    biases = np.empty(classes.size)
    for k, cls in enumerate(classes):
        y_bin = np.where(y == cls, 1.0, -1.0)
        if loss == "squared_hinge":
            w = _solve_squared_hinge(Xa, y_bin, C, tol=tol)
        else:
            w = _solve_hinge(Xa, y_bin, C)
        weights[k] = w[:-1]
        biases[k] = w[-1]
    return LinearSvmModel(weights=weights, biases=biases, C=C, classes=classes, loss=loss)


def predict_svm(model: LinearSvmModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax over per-class scores; ties break toward the lowest class index."""
    scores = model.decision_scores(X)
    return model.classes[np.argmax(scores, axis=1)], scores


def save_svm(path: str | Path, model: LinearSvmModel) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "model": "linear_svm",
        "C": model.C,
        "loss": model.loss,
        "n_classes": int(model.classes.size),
        "dim": int(model.weights.shape[1]),
    }
    with Path(path).open("wb") as fh:
        np.savez(
            fh,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
            weights=model.weights,
            biases=model.biases,
            classes=model.classes,
        )


def load_svm(path: str | Path) -> LinearSvmModel:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("model") != "linear_svm":
            raise DataError(f"{path}: not a linear SVM model file")
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format {meta.get('format_version')}")
        return LinearSvmModel(
            weights=data["weights"],
            biases=data["biases"],
            C=float(meta["C"]),
            classes=data["classes"],
            loss=meta["loss"],
        )
