"""Gradient-descent solver for the all-threshold margin factorization.

Evaluates the regularized hinge objective, computes exact gradients for
the user factors, item factors, and thresholds, and runs a monotone
descent loop with backtracking step control.  Also provides full-matrix
completion and the textual checkpoint format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import (
    FactorModel,
    Hyperparams,
    SparseRatingMatrix,
    discretize_rows,
    smooth_hinge,
    smooth_hinge_grad,
)

CHECKPOINT_MAGIC = "STMMMF"

# Step size below which backtracking gives up on finding a decrease.
_MIN_LR = 1e-18
# Accepted steps between step-size restores to the configured value.
_LR_RESTORE_EVERY = 10


class TrainingDivergedError(RuntimeError):
    """Raised when the objective or a gradient stops being finite."""


@dataclass
class TrainTrace:
    """Objective history of one solve; objectives[0] is the initial value."""

    objectives: np.ndarray
    iterations: int
    converged: bool
    order_violations: int


def _check_shapes(model: FactorModel, y: SparseRatingMatrix):
    if model.n_users != y.n_users or model.n_items != y.n_items:
        raise ValueError("model and matrix dimensions differ")
    if model.max_rating != y.max_rating:
        raise ValueError("model and matrix rating scales differ")


def _observed_scores(model: FactorModel, y: SparseRatingMatrix) -> np.ndarray:
    return np.einsum(
        "ij,ij->i", model.user_factors[y.users], model.item_factors[y.items]
    )


def objective(model: FactorModel, y: SparseRatingMatrix, reg: float) -> float:
    """Regularized all-threshold hinge objective.

    Sums smooth_hinge(T * (theta_r - x)) over every observed entry and
    every threshold level r, plus reg/2 times the squared Frobenius norms
    of the factor matrices.
    """
    _check_shapes(model, y)
    if reg < 0:
        raise ValueError("reg must be >= 0")
    x = _observed_scores(model, y)
    theta = model.thresholds
    total = 0.0
    for r in range(1, y.max_rating):
        t = np.where(r >= y.ratings, 1.0, -1.0)
        z = t * (theta[y.users, r - 1] - x)
        total += smooth_hinge(z).sum()
    norms = np.sum(model.user_factors**2) + np.sum(model.item_factors**2)
    return float(total + 0.5 * reg * norms)


def compute_gradients(model: FactorModel, y: SparseRatingMatrix, reg: float):
    """Exact gradients of the objective w.r.t. factors and thresholds.

    Returns (g_user, g_item, g_theta).  Users or items with no observed
    ratings only receive the regularizer term (zero for thresholds).
    """
    _check_shapes(model, y)
    if reg < 0:
        raise ValueError("reg must be >= 0")
    U, V, theta = model.user_factors, model.item_factors, model.thresholds
    x = _observed_scores(model, y)
    weights = np.zeros(y.n_observed)
    g_theta = np.zeros_like(theta)
    for r in range(1, y.max_rating):
        t = np.where(r >= y.ratings, 1.0, -1.0)
        coef = t * smooth_hinge_grad(t * (theta[y.users, r - 1] - x))
        weights += coef
        g_theta[:, r - 1] = np.bincount(y.users, weights=coef, minlength=y.n_users)
    w = sparse.coo_matrix(
        (weights, (y.users, y.items)), shape=(y.n_users, y.n_items)
    ).tocsr()
    g_user = reg * U - w @ V
    g_item = reg * V - w.T @ U
    return g_user, g_item, g_theta


def gd_step(model: FactorModel, grads, lr: float) -> FactorModel:
    """One descent step; thresholds follow the same update rule."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    g_user, g_item, g_theta = grads
    for g in grads:
        if not np.isfinite(g).all():
            raise TrainingDivergedError("non-finite gradient entries")
    return FactorModel(
        model.user_factors - lr * g_user,
        model.item_factors - lr * g_item,
        model.thresholds - lr * g_theta,
    )


def initial_model(y: SparseRatingMatrix, n_factors: int, seed: int) -> FactorModel:
    """Seeded starting point: small uniform factors, evenly spaced thresholds.

    Factor entries are uniform(-0.5, 0.5)/sqrt(d) so initial scores sit
    near zero; threshold r starts at r - R/2 for every user, centering the
    scale at the score origin.
    """
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(n_factors)
    u = rng.uniform(-0.5, 0.5, size=(y.n_users, n_factors)) * scale
    v = rng.uniform(-0.5, 0.5, size=(y.n_items, n_factors)) * scale
    theta = np.tile(
        np.arange(1, y.max_rating, dtype=np.float64) - y.max_rating / 2.0,
        (y.n_users, 1),
    )
    return FactorModel(u, v, theta)


def train(y: SparseRatingMatrix, params: Hyperparams, n_factors: int):
    """Fit factors and thresholds to the observed entries of y.

    Runs at most params.max_iters descent steps.  A step that would raise
    the objective is retried with a halved step size; the step size is
    restored to its configured value every 10 accepted steps.  Stops early
    once the relative objective decrease falls below params.tol.  Returns
    (model, trace) with a non-increasing accepted-objective sequence.
    """
    if y.n_observed == 0:
        raise ValueError("cannot train on an empty rating matrix")
    if n_factors < 1:
        raise ValueError("n_factors must be >= 1")
    model = initial_model(y, n_factors, params.seed)
    current = objective(model, y, params.reg)
    if not np.isfinite(current):
        raise TrainingDivergedError("initial objective is not finite")
    objectives = [current]
    lr = params.lr
    accepted = 0
    violations = 0
    converged = False
    for _ in range(params.max_iters):
        grads = compute_gradients(model, y, params.reg)
        proposal = None
        while lr >= _MIN_LR:
            candidate = gd_step(model, grads, lr)
            value = objective(candidate, y, params.reg)
            if np.isfinite(value) and value <= current:
                proposal = (candidate, value)
                break
            lr *= 0.5
        if proposal is None:
            break
        model, value = proposal
        accepted += 1
        objectives.append(value)
        violations += int(
            np.count_nonzero(np.any(np.diff(model.thresholds, axis=1) < 0, axis=1))
        )
        rel_drop = (current - value) / max(current, 1.0)
        current = value
        if rel_drop < params.tol:
            converged = True
            break
        if accepted % _LR_RESTORE_EVERY == 0:
            lr = params.lr
    trace = TrainTrace(np.array(objectives), accepted, converged, violations)
    return model, trace


def predict_all(model: FactorModel, block: int = 256) -> np.ndarray:
    """Dense rating predictions for every cell (discretized scores)."""
    out = np.empty((model.n_users, model.n_items), dtype=np.int64)
    for start in range(0, model.n_users, block):
        stop = min(start + block, model.n_users)
        scores = model.user_factors[start:stop] @ model.item_factors.T
        out[start:stop] = discretize_rows(model.thresholds[start:stop], scores)
    return out


def complete_matrix(model: FactorModel, y: SparseRatingMatrix) -> np.ndarray:
    """Dense completion: observed cells keep their rating, the rest are
    filled with discretized scores."""
    _check_shapes(model, y)
    out = predict_all(model)
    out[y.users, y.items] = y.ratings
    return out


def predict_ratings(model: FactorModel, users, items, trained_on=None) -> np.ndarray:
    """Discretized predictions for (user, item) index arrays.

    If trained_on is given, users that had no observed training ratings
    fall back to the mid-scale rating ceil(R/2).
    """
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    scores = np.einsum("ij,ij->i", model.user_factors[users], model.item_factors[items])
    out = discretize_rows(model.thresholds[users], scores[:, None])[:, 0]
    if trained_on is not None:
        cold = trained_on.user_counts() == 0
        out[cold[users]] = (model.max_rating + 1) // 2
    return out


def save_checkpoint(model: FactorModel, target):
    """Write the textual checkpoint: header then U, V, theta rows."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    stream = open(target, "w") if own else target
    try:
        stream.write(
            f"{CHECKPOINT_MAGIC} 1 {model.n_users} {model.n_items} "
            f"{model.n_factors} {model.max_rating}\n"
        )
        for block in (model.user_factors, model.item_factors, model.thresholds):
            for row in block:
                stream.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if own:
            stream.close()


def load_checkpoint(source) -> FactorModel:
    """Read a checkpoint written by save_checkpoint."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    stream = open(source) if own else source
    try:
        header = stream.readline().split()
        if len(header) != 6 or header[0] != CHECKPOINT_MAGIC or header[1] != "1":
            raise ValueError("not a recognized checkpoint header")
        n_users, n_items, n_factors, max_rating = map(int, header[2:])
        def read_block(rows, cols):
            data = np.empty((rows, cols))
            for k in range(rows):
                parts = stream.readline().split()
                if len(parts) != cols:
                    raise ValueError(f"checkpoint row {k} has {len(parts)} values, expected {cols}")
                data[k] = [float(p) for p in parts]
            return data
        u = read_block(n_users, n_factors)
        v = read_block(n_items, n_factors)
        theta = read_block(n_users, max_rating - 1)
        return FactorModel(u, v, theta)
    finally:
        if own:
            stream.close()
