"""Linear readout over bias-augmented reservoir states, with online trainers.

Features are ``phi = [x; 1]``, so the last weight is the bias. Two online
trainers are provided: LMS (cheap, hardware friendly) and RLS (fast
convergence for small readouts). ``ridge_batch`` is the offline solution RLS
must agree with when ``forgetting == 1`` and ``P0 = I / init_scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidParameterError, SingularSystemError, StateDivergenceError


def augment(x) -> np.ndarray:
    """Append the constant bias feature to a state vector (or each row of a matrix)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.append(x, 1.0)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def predict(w, x) -> float:
    """Readout output ``w . [x; 1]``."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != (x.size + 1,):
        raise InvalidParameterError(f"weights of length {w.size} do not fit a state of length {x.size}")
    return float(w[:-1] @ x + w[-1])


@dataclass
class LmsState:
    """Least-mean-squares trainer: ``w <- w + mu * e * phi``."""

    weights: np.ndarray
    step_size: float

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if not self.step_size > 0:
            raise InvalidParameterError("LMS step size must be > 0")

    @classmethod
    def zeros(cls, n_virtual: int, step_size: float) -> "LmsState":
        return cls(np.zeros(n_virtual + 1), step_size)

    def update(self, x, target: float) -> float:
        phi = augment(x)
        if phi.size != self.weights.size:
            raise InvalidParameterError("state length does not match weights")
        err = target - float(self.weights @ phi)
        with np.errstate(over="ignore", invalid="ignore"):
            w = self.weights + (self.step_size * err) * phi
        if not np.all(np.isfinite(w)):
            raise StateDivergenceError("LMS weights diverged; step size too large?")
        self.weights = w
        return err


@dataclass
class RlsState:
    """Recursive least squares with forgetting factor ``forgetting``.

    ``p_matrix`` starts at ``I / init_scale`` and is re-symmetrized after every
    update so it cannot drift apart from its transpose on long streams.
    """

    weights: np.ndarray
    p_matrix: np.ndarray
    forgetting: float = 1.0
    init_scale: float = 1e-4

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        self.p_matrix = np.array(self.p_matrix, dtype=float)
        n = self.weights.size
        if self.p_matrix.shape != (n, n):
            raise InvalidParameterError("P must be square with the weight dimension")
        if not 0.0 < self.forgetting <= 1.0:
            raise InvalidParameterError("forgetting factor must lie in (0, 1]")
        if not self.init_scale > 0:
            raise InvalidParameterError("init_scale must be > 0")

    @classmethod
    def zeros(cls, n_virtual: int, forgetting: float = 1.0, init_scale: float = 1e-4) -> "RlsState":
        if not init_scale > 0:
            raise InvalidParameterError("init_scale must be > 0")
        n = n_virtual + 1
        return cls(np.zeros(n), np.eye(n) / init_scale, forgetting, init_scale)

    def update(self, x, target: float) -> float:
        phi = augment(x)
        if phi.size != self.weights.size:
            raise InvalidParameterError("state length does not match weights")
        p = self.p_matrix
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            p_phi = p @ phi
            gain = p_phi / (self.forgetting + phi @ p_phi)
            err = target - float(self.weights @ phi)
            w = self.weights + gain * err
            p = (p - np.outer(gain, phi @ p)) / self.forgetting
            p = 0.5 * (p + p.T)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            raise StateDivergenceError("RLS recursion produced non-finite values")
        self.weights = w
        self.p_matrix = p
        return err


Trainer = Union[LmsState, RlsState]


def lms_update(state: LmsState, x, target: float):
    """One LMS step; returns ``(state, pre-update error)``. ``state`` is updated in place."""
    return state, state.update(x, target)


def rls_update(state: RlsState, x, target: float):
    """One RLS step; returns ``(state, pre-update error)``. ``state`` is updated in place."""
    return state, state.update(x, target)


def ridge_batch(X, d, reg: float) -> np.ndarray:
    """Minimize ``||X w - d||^2 + reg ||w||^2``.

    ``X`` rows are already bias-augmented. Solved as the stacked least-squares
    problem ``[X; sqrt(reg) I] w = [d; 0]`` via SVD-based ``lstsq``, which avoids
    squaring the condition number of ``X``. With ``reg == 0`` a rank-deficient
    ``X`` raises instead of silently returning a minimum-norm solution.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != d.size:
        raise InvalidParameterError("X must have T >= 1 rows matching len(d)")
    if reg < 0:
        raise InvalidParameterError("reg must be >= 0")
    n = X.shape[1]
    if reg > 0:
        A = np.vstack([X, math.sqrt(reg) * np.eye(n)])
        b = np.concatenate([d, np.zeros(n)])
    else:
        A, b = X, d
    w, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n:
        raise SingularSystemError(f"design matrix has rank {rank} < {n} and reg == 0")
    return w


def default_step_size(states, washout: int) -> float:
    """LMS step ``0.1 / mean ||phi||^2`` over the washout rows (the first row if none).

    ``math.fsum`` keeps the result independent of summation order, so a stream
    that accumulates the norms one sample at a time gets the same step.
    """
    rows = np.asarray(states, dtype=float)[:max(washout, 1)]
    if rows.shape[0] == 0:
        raise InvalidParameterError("no rows available to size the LMS step")
    return step_size_from_norms([feature_norm_sq(r) for r in rows])


def feature_norm_sq(x) -> float:
    """``||[x; 1]||^2`` computed exactly rounded."""
    return math.fsum([v * v for v in np.asarray(x, dtype=float).tolist()] + [1.0])


def step_size_from_norms(norms) -> float:
    return 0.1 / (math.fsum(norms) / len(norms))


def train_online(trainer: Trainer, states, targets, washout: int = 0):
    """Apply the trainer's update to every step ``t >= washout`` in order.

    Returns ``(trainer, errors)`` where ``errors[j]`` is the pre-update error of
    step ``washout + j``.
    """
    states = np.asarray(states, dtype=float)
    targets = np.asarray(targets, dtype=float).ravel()
    if states.shape[0] != targets.size:
        raise InvalidParameterError("states and targets must have the same length")
    if not 0 <= washout < targets.size:
        raise InvalidParameterError("washout must satisfy 0 <= washout < T")
    errors = np.empty(targets.size - washout)
    for j, t in enumerate(range(washout, targets.size)):
        try:
            errors[j] = trainer.update(states[t], float(targets[t]))
        except StateDivergenceError as exc:
            raise StateDivergenceError(str(exc), step=t, phase="train") from exc
    return trainer, errors
