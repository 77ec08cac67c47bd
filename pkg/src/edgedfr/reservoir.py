"""Delayed feedback reservoir: input masking and time-multiplexed virtual nodes.

A single nonlinear node is shared by ``n_virtual`` virtual nodes laid out along
a delay loop. Each input sample is held for one loop period, multiplied by a
fixed mask, and every virtual node mixes its masked input with its own state
from the previous period::

    x[t, i] = f(eta * x[t-1, i] + gamma * m[i] * u[t])

In ``CASCADE`` mode the node also sees the virtual node that was updated just
before it (``k`` is ``cascade_coupling``)::

    z[t, i] = (1 - k) * (eta * x[t-1, i] + gamma * m[i] * u[t]) + k * x[t, i-1]

with ``x[t, -1] = x[t-1, N-1]``, so the loop closes on itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, StateDivergenceError
from .nonlinearity import NonlinearitySpec, scalar_function


class UpdateMode(str, enum.Enum):
    IDEAL_DELAY = "ideal-delay"
    CASCADE = "cascade"


class MaskKind(str, enum.Enum):
    BINARY = "binary"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class ReservoirParams:
    n_virtual: int = 100
    feedback_gain: float = 0.8
    input_gain: float = 0.5
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec.tanh)
    update_mode: UpdateMode = UpdateMode.CASCADE
    cascade_coupling: float = 0.5
    washout: int = 200

    def __post_init__(self):
        object.__setattr__(self, "update_mode", UpdateMode(self.update_mode))
        if int(self.n_virtual) != self.n_virtual or self.n_virtual < 1:
            raise InvalidParameterError("n_virtual must be a positive integer")
        if not 0.0 <= self.feedback_gain < 1.0:
            raise InvalidParameterError("feedback_gain must lie in [0, 1)")
        if not 0.0 <= self.cascade_coupling <= 1.0:
            raise InvalidParameterError("cascade_coupling must lie in [0, 1]")
        if not np.isfinite(self.input_gain):
            raise InvalidParameterError("input_gain must be finite")
        if self.washout < 0:
            raise InvalidParameterError("washout must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n_virtual": int(self.n_virtual),
            "feedback_gain": float(self.feedback_gain),
            "input_gain": float(self.input_gain),
            "nonlinearity": self.nonlinearity.to_dict(),
            "update_mode": self.update_mode.value,
            "cascade_coupling": float(self.cascade_coupling),
            "washout": int(self.washout),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirParams":
        d = dict(d)
        if "nonlinearity" in d:
            d["nonlinearity"] = NonlinearitySpec.from_dict(d["nonlinearity"])
        return cls(**d)


@dataclass(frozen=True)
class MaskVector:
    values: np.ndarray
    kind: MaskKind
    seed: int

    def __len__(self):
        return self.values.size


def new_mask(n: int, kind: MaskKind = MaskKind.BINARY, seed: int = 0) -> MaskVector:
    """Draw a reproducible input mask of length ``n``.

    Binary masks take values in {-1, +1}, uniform masks in [-1, 1].
    """
    if n < 1:
        raise InvalidParameterError("mask length must be >= 1")
    kind = MaskKind(kind)
    rng = np.random.default_rng(seed)
    if kind is MaskKind.BINARY:
        values = rng.integers(0, 2, size=n).astype(float) * 2.0 - 1.0
    else:
        values = rng.uniform(-1.0, 1.0, size=n)
    values.setflags(write=False)
    return MaskVector(values, kind, int(seed))


def mask_input(u: float, mask: MaskVector, input_gain: float) -> np.ndarray:
    return input_gain * mask.values * u


class DelayLine:
    """Node states of the previous input period plus the input-step counter.

    All virtual nodes are rewritten on every step, so ``cursor`` returns to 0
    after each full pass; it is kept so the ring can be checkpointed as-is.
    """

    def __init__(self, n_virtual: int, buffer=None):
        self.buffer = np.zeros(n_virtual)
        self.cursor = 0
        self.t = 0
        if buffer is not None:
            buffer = np.asarray(buffer, dtype=float)
            if buffer.shape != (n_virtual,):
                raise InvalidParameterError("delay buffer length must equal n_virtual")
            self.buffer[:] = buffer

    def __len__(self):
        return self.buffer.size

    def reset(self):
        self.buffer[:] = 0.0
        self.cursor = 0
        self.t = 0

    def copy(self) -> "DelayLine":
        other = DelayLine(self.buffer.size, self.buffer)
        other.cursor, other.t = self.cursor, self.t
        return other


def reset(delay: DelayLine) -> None:
    delay.reset()


def _check_dims(params: ReservoirParams, mask: MaskVector, delay: DelayLine):
    if len(mask) != params.n_virtual or len(delay) != params.n_virtual:
        raise InvalidParameterError(
            f"mask ({len(mask)}) and delay line ({len(delay)}) must have "
            f"n_virtual={params.n_virtual} entries")


def step(params: ReservoirParams, mask: MaskVector, delay: DelayLine, u: float) -> np.ndarray:
    """Advance the reservoir by one input sample and return the new node states."""
    _check_dims(params, mask, delay)
    prev = delay.buffer
    # overflow is caught below as a non-finite state
    with np.errstate(over="ignore", invalid="ignore"):
        drive = params.feedback_gain * prev + mask_input(u, mask, params.input_gain)
        if params.update_mode is UpdateMode.IDEAL_DELAY:
            x = np.asarray(params.nonlinearity(drive), dtype=float)
        else:
            f = scalar_function(params.nonlinearity)
            k = params.cascade_coupling
            keep = 1.0 - k
            out = []
            left = float(prev[-1])
            for d in drive.tolist():
                left = f(keep * d + k * left)
                out.append(left)
            x = np.array(out, dtype=float)
    if not np.all(np.isfinite(x)):
        node = int(np.flatnonzero(~np.isfinite(x))[0])
        raise StateDivergenceError("non-finite reservoir state", step=delay.t, node=node)
    delay.buffer[:] = x
    delay.cursor = 0
    delay.t += 1
    return x


def run_sequence(params: ReservoirParams, mask: MaskVector, inputs,
                 delay: DelayLine | None = None) -> np.ndarray:
    """Drive the reservoir with ``inputs`` and return the ``T x N`` state matrix.

    A fresh zero delay line is used unless ``delay`` is given; a supplied delay
    line is advanced in place.
    """
    if delay is None:
        delay = DelayLine(params.n_virtual)
    _check_dims(params, mask, delay)
    inputs = np.asarray(inputs, dtype=float).ravel()
    states = np.empty((inputs.size, params.n_virtual))
    for t, u in enumerate(inputs.tolist()):
        states[t] = step(params, mask, delay, u)
    return states
