"""Reservoir node functions and their piecewise-linear (LUT) approximation."""

from __future__ import annotations

import bisect
import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError


class Variant(str, enum.Enum):
    MACKEY_GLASS = "mackey-glass"
    TANH = "tanh"
    IDENTITY = "identity"
    PIECEWISE_LINEAR = "pwl"


@dataclass(frozen=True)
class PwlTable:
    """Knot table for a piecewise-linear function on ``[domain_lo, domain_hi]``.

    Inputs outside the domain are clamped, mirroring a saturating hardware LUT.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.shape != vals.shape or bp.size < 2:
            raise InvalidParameterError("breakpoints and values must be 1-D, same length, >= 2")
        if not np.all(np.diff(bp) > 0):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise InvalidParameterError("PWL table entries must be finite")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_lists", (bp.tolist(), vals.tolist()))

    @property
    def domain_lo(self) -> float:
        return float(self.breakpoints[0])

    @property
    def domain_hi(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def segments(self) -> int:
        return self.breakpoints.size - 1

    def __call__(self, z):
        bp, vals = self.breakpoints, self.values
        z = np.clip(z, bp[0], bp[-1])
        j = np.clip(np.searchsorted(bp, z, side="right") - 1, 0, bp.size - 2)
        b0, v0 = bp[j], vals[j]
        y = v0 + (vals[j + 1] - v0) * ((z - b0) / (bp[j + 1] - b0))
        return np.where(z == bp[-1], vals[-1], y)

    def scalar(self, z: float) -> float:
        """Same as calling the table, on a Python float (used in per-node loops)."""
        bp, vals = self._lists
        z = min(max(z, bp[0]), bp[-1])
        if z == bp[-1]:
            return vals[-1]
        j = min(max(bisect.bisect_right(bp, z) - 1, 0), len(bp) - 2)
        b0, v0 = bp[j], vals[j]
        return v0 + (vals[j + 1] - v0) * ((z - b0) / (bp[j + 1] - b0))

    def __eq__(self, other):
        if not isinstance(other, PwlTable):
            return NotImplemented
        return (np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def to_dict(self) -> dict:
        return {"breakpoints": [float(b) for b in self.breakpoints],
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "PwlTable":
        return cls(np.array(d["breakpoints"], dtype=float), np.array(d["values"], dtype=float))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Node function ``f`` of the reservoir.

    ``mg_exponent`` is only read by the Mackey-Glass variant and ``pwl`` only by
    the piecewise-linear one.
    """

    variant: Variant = Variant.TANH
    mg_exponent: float = 1.0
    pwl: Optional[PwlTable] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.mg_exponent > 0:
            raise InvalidParameterError("mg_exponent must be > 0")
        if self.variant is Variant.PIECEWISE_LINEAR and self.pwl is None:
            raise InvalidParameterError("piecewise-linear nonlinearity needs a PwlTable")

    @classmethod
    def tanh(cls) -> "NonlinearitySpec":
        return cls(Variant.TANH)

    @classmethod
    def identity(cls) -> "NonlinearitySpec":
        return cls(Variant.IDENTITY)

    @classmethod
    def mackey_glass(cls, p: float = 1.0) -> "NonlinearitySpec":
        return cls(Variant.MACKEY_GLASS, mg_exponent=p)

    @classmethod
    def piecewise_linear(cls, table: PwlTable) -> "NonlinearitySpec":
        return cls(Variant.PIECEWISE_LINEAR, pwl=table)

    @property
    def has_zero_fixed_point(self) -> bool:
        return float(self(0.0)) == 0.0

    def __call__(self, z):
        return evaluate(self, z)

    def to_dict(self) -> dict:
        d = {"variant": self.variant.value}
        if self.variant is Variant.MACKEY_GLASS:
            d["mg_exponent"] = self.mg_exponent
        if self.variant is Variant.PIECEWISE_LINEAR:
            d["pwl"] = self.pwl.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NonlinearitySpec":
        pwl = PwlTable.from_dict(d["pwl"]) if d.get("pwl") is not None else None
        return cls(Variant(d["variant"]), float(d.get("mg_exponent", 1.0)), pwl)


def _mg_scalar(z: float, p: float) -> float:
    try:
        return z / (1.0 + abs(z) ** p)
    except OverflowError:
        # |z|**p beyond float range: the 1 is negligible, so use |z|**(1-p)
        return math.copysign(math.exp((1.0 - p) * math.log(abs(z))), z)


def _mg_array(z, p: float):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = z / (1.0 + np.abs(z) ** p)
        big = np.isinf(np.abs(z) ** p) & np.isfinite(z)
        if np.any(big):
            zb = z[big] if z.ndim else z
            alt = np.copysign(np.exp((1.0 - p) * np.log(np.abs(zb))), zb)
            if z.ndim:
                out[big] = alt
            else:
                out = alt
    return out if z.ndim else float(out)


def evaluate(spec: NonlinearitySpec, z):
    """Apply ``spec`` to a scalar or array.

    Mackey-Glass is ``z / (1 + |z|**p)``, extended to negative ``z`` as an odd
    function.
    """
    v = spec.variant
    if v is Variant.IDENTITY:
        return z
    if v is Variant.TANH:
        return np.tanh(z)
    if v is Variant.MACKEY_GLASS:
        return _mg_array(z, spec.mg_exponent)
    return spec.pwl(z)


def scalar_function(spec: NonlinearitySpec):
    """Return a Python-float callable equivalent to ``spec`` for tight loops."""
    v = spec.variant
    if v is Variant.IDENTITY:
        return lambda z: z
    if v is Variant.TANH:
        return math.tanh
    if v is Variant.MACKEY_GLASS:
        return functools.partial(_mg_scalar, p=spec.mg_exponent)
    return spec.pwl.scalar


def build_pwl(spec: NonlinearitySpec, segments: int, lo: float, hi: float) -> PwlTable:
    """Tabulate ``spec`` at ``segments + 1`` uniformly spaced knots on ``[lo, hi]``."""
    if spec.variant is Variant.PIECEWISE_LINEAR:
        raise InvalidParameterError("cannot build a PWL table from a PWL nonlinearity")
    if segments < 1:
        raise InvalidParameterError("segments must be >= 1")
    if not lo < hi:
        raise InvalidParameterError("require lo < hi")
    knots = np.linspace(lo, hi, segments + 1)
    knots[0], knots[-1] = lo, hi
    return PwlTable(knots, np.asarray(evaluate(spec, knots), dtype=float))
