"""Bit-accurate signed fixed-point arithmetic and the quantized datapath.

Values are two's-complement integers ``raw`` interpreted as ``raw * 2**-frac_bits``.
Everything past the real-to-fixed boundary (``quantize``) runs on integers:
Python ints for scalars, object-dtype arrays of Python ints for vectors, so
products never overflow before the format's rounding and overflow rules apply.
Results are therefore identical on every platform.
"""

from __future__ import annotations

import bisect
import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigurationError, InvalidParameterError
from .nonlinearity import PwlTable, Variant
from .reservoir import MaskVector, ReservoirParams, UpdateMode


class Rounding(str, enum.Enum):
    TRUNCATE = "truncate"
    NEAREST_EVEN = "rne"


class Overflow(str, enum.Enum):
    SATURATE = "saturate"
    WRAP = "wrap"


@dataclass(frozen=True)
class QFormat:
    """Signed Q format with ``total_bits`` (sign included) and ``frac_bits``.

    Truncation drops the discarded bits, i.e. rounds toward minus infinity, which
    is what a plain arithmetic shift does in hardware.
    """

    total_bits: int = 16
    frac_bits: int = 12
    rounding: Rounding = Rounding.NEAREST_EVEN
    overflow: Overflow = Overflow.SATURATE

    def __post_init__(self):
        object.__setattr__(self, "rounding", Rounding(self.rounding))
        object.__setattr__(self, "overflow", Overflow(self.overflow))
        if not 2 <= self.total_bits <= 64:
            raise InvalidParameterError("total_bits must lie in [2, 64]")
        if not 0 <= self.frac_bits <= self.total_bits - 1:
            raise InvalidParameterError("frac_bits must lie in [0, total_bits - 1]")

    @property
    def int_bits(self) -> int:
        return self.total_bits - self.frac_bits

    @functools.cached_property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @functools.cached_property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def ulp(self) -> float:
        return math.ldexp(1.0, -self.frac_bits)

    @property
    def min_value(self) -> float:
        return math.ldexp(self.min_raw, -self.frac_bits)

    @property
    def max_value(self) -> float:
        return math.ldexp(self.max_raw, -self.frac_bits)

    def with_frac_bits(self, frac_bits: int) -> "QFormat":
        """Same integer headroom, different precision."""
        return QFormat(self.int_bits + frac_bits, frac_bits, self.rounding, self.overflow)

    def to_dict(self) -> dict:
        return {"total_bits": self.total_bits, "frac_bits": self.frac_bits,
                "rounding": self.rounding.value, "overflow": self.overflow.value}

    @classmethod
    def from_dict(cls, d: dict) -> "QFormat":
        return cls(int(d["total_bits"]), int(d["frac_bits"]),
                   Rounding(d.get("rounding", "rne")), Overflow(d.get("overflow", "saturate")))

    def __str__(self):
        return f"Q({self.total_bits},{self.frac_bits})"


@dataclass(frozen=True)
class FixedVal:
    raw: int
    fmt: QFormat

    def __post_init__(self):
        if not self.fmt.min_raw <= self.raw <= self.fmt.max_raw:
            raise InvalidParameterError(f"raw {self.raw} does not fit {self.fmt}")

    def to_real(self) -> float:
        return math.ldexp(self.raw, -self.fmt.frac_bits)

    def __float__(self):
        return self.to_real()


@dataclass(frozen=True)
class FixedArray:
    """Array of raws sharing one format (e.g. a quantized state matrix)."""

    raw: np.ndarray
    fmt: QFormat

    def to_real(self) -> np.ndarray:
        return np.ldexp(self.raw.astype(float), -self.fmt.frac_bits)

    @property
    def shape(self):
        return self.raw.shape

    def __len__(self):
        return len(self.raw)


# ---------------------------------------------------------------------------
# raw-integer primitives; each accepts a Python int or an object-dtype array


def _shift_round(v, shift: int, rounding: Rounding):
    """``v * 2**-shift`` rounded to an integer (``shift <= 0`` is an exact left shift)."""
    if shift <= 0:
        return v << -shift
    q = v >> shift
    if rounding is Rounding.TRUNCATE:
        return q
    r = v - (q << shift)
    half = 1 << (shift - 1)
    return q + ((r > half) | ((r == half) & ((q & 1) == 1)))


def _round_div(num, den, rounding: Rounding):
    """``num / den`` rounded to an integer, ``den > 0``."""
    q = num // den
    if rounding is Rounding.TRUNCATE:
        return q
    r2 = 2 * (num - q * den)
    return q + ((r2 > den) | ((r2 == den) & ((q & 1) == 1)))


def _overflow(v, fmt: QFormat):
    lo, hi = fmt.min_raw, fmt.max_raw
    if fmt.overflow is Overflow.SATURATE:
        if isinstance(v, np.ndarray):
            return np.minimum(np.maximum(v, lo), hi)
        return min(max(v, lo), hi)
    return (v - lo) % (1 << fmt.total_bits) + lo


def _convert(v, from_frac: int, fmt: QFormat):
    """Re-express raws with ``from_frac`` fractional bits in ``fmt``."""
    return _overflow(_shift_round(v, from_frac - fmt.frac_bits, fmt.rounding), fmt)


def _mul(a, fa: int, b, fb: int, fmt: QFormat):
    """Full-width product of raws, then rounded and overflow-handled into ``fmt``."""
    return _convert(a * b, fa + fb, fmt)


def _scalar_kernels(fmt: QFormat):
    """Python-int specializations of ``_overflow`` and same-format ``_mul``.

    Used in the per-node loops; they must agree bit-for-bit with the generic
    primitives above.
    """
    lo, hi, fs = fmt.min_raw, fmt.max_raw, fmt.frac_bits
    span = 1 << fmt.total_bits
    saturate = fmt.overflow is Overflow.SATURATE
    nearest = fmt.rounding is Rounding.NEAREST_EVEN and fs > 0
    half = (1 << (fs - 1)) if fs > 0 else 0
    low_mask = (1 << fs) - 1

    def clip(v):
        if saturate:
            return lo if v < lo else hi if v > hi else v
        return (v - lo) % span + lo

    def mul(a, b):
        v = a * b
        q = v >> fs
        if nearest:
            r = v & low_mask
            if r > half or (r == half and q & 1):
                q += 1
        if saturate:
            return lo if q < lo else hi if q > hi else q
        return (q - lo) % span + lo

    return clip, mul


def _wide(raw) -> np.ndarray:
    return np.asarray(raw).astype(object)


def _narrow(v) -> np.ndarray:
    return np.asarray(v, dtype=object).astype(np.int64)


# ---------------------------------------------------------------------------
# public scalar API


def quantize(x: float, fmt: QFormat) -> FixedVal:
    """Nearest representable value per the format's rounding and overflow rules."""
    return FixedVal(quantize_raw(x, fmt), fmt)


def quantize_raw(x: float, fmt: QFormat) -> int:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidParameterError(f"cannot quantize non-finite value {x}")
    scaled = math.ldexp(x, fmt.frac_bits)  # exact: power-of-two scaling
    if fmt.rounding is Rounding.TRUNCATE:
        raw = math.floor(scaled)
    else:
        raw = round(scaled)  # ties to even
    return _overflow(int(raw), fmt)


def quantize_array(x, fmt: QFormat) -> FixedArray:
    x = np.asarray(x, dtype=float)
    flat = [quantize_raw(v, fmt) for v in x.ravel().tolist()]
    return FixedArray(np.array(flat, dtype=np.int64).reshape(x.shape), fmt)


def _same_format(a: FixedVal, b: FixedVal):
    if a.fmt != b.fmt:
        raise InvalidParameterError(f"format mismatch: {a.fmt} vs {b.fmt}")


def fx_add(a: FixedVal, b: FixedVal) -> FixedVal:
    _same_format(a, b)
    return FixedVal(_overflow(a.raw + b.raw, a.fmt), a.fmt)


def fx_mul(a: FixedVal, b: FixedVal) -> FixedVal:
    _same_format(a, b)
    f = a.fmt.frac_bits
    return FixedVal(_mul(a.raw, f, b.raw, f, a.fmt), a.fmt)


# ---------------------------------------------------------------------------
# quantized reservoir


@dataclass(frozen=True)
class QuantizedPwl:
    """PWL table with breakpoints in the state format and knot values in the weight format.

    Interpolation is a single exact rational division rounded into the state
    format, so knots reproduce their tabulated values exactly whenever the
    state format is at least as fine as the weight format.
    """

    breakpoints: tuple
    values: tuple
    fmt_state: QFormat
    fmt_weight: QFormat

    @classmethod
    def from_table(cls, table: PwlTable, fmt_state: QFormat, fmt_weight: QFormat) -> "QuantizedPwl":
        bp = tuple(quantize_raw(b, fmt_state) for b in table.breakpoints)
        vals = tuple(quantize_raw(v, fmt_weight) for v in table.values)
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise InvalidConfigurationError(
                f"PWL breakpoints collide or saturate when quantized to {fmt_state}")
        return cls(bp, vals, fmt_state, fmt_weight)

    @functools.cached_property
    def _consts(self):
        d = self.fmt_state.frac_bits - self.fmt_weight.frac_bits
        num_shift, den_shift = (d, 0) if d >= 0 else (0, -d)
        clip = _scalar_kernels(self.fmt_state)[0]
        return num_shift, den_shift, self.fmt_state.rounding is Rounding.NEAREST_EVEN, clip

    def eval_raw(self, z: int) -> int:
        bp, vals = self.breakpoints, self.values
        num_shift, den_shift, nearest, clip = self._consts
        z = bp[0] if z < bp[0] else bp[-1] if z > bp[-1] else z
        j = min(bisect.bisect_right(bp, z) - 1, len(bp) - 2)
        b0, v0 = bp[j], vals[j]
        width = bp[j + 1] - b0
        num = (v0 * width + (vals[j + 1] - v0) * (z - b0)) << num_shift
        den = width << den_shift
        y = num // den
        if nearest:
            r2 = 2 * (num - y * den)
            if r2 > den or (r2 == den and y & 1):
                y += 1
        return clip(y)

    def eval_array(self, z):
        """Vectorized ``eval_raw`` over an object array of raws."""
        bp = np.array(self.breakpoints, dtype=object)
        vals = np.array(self.values, dtype=object)
        num_shift, den_shift, _, _ = self._consts
        z = np.minimum(np.maximum(z, bp[0]), bp[-1])
        j = np.clip(np.searchsorted(np.array(self.breakpoints, dtype=np.int64),
                                    z.astype(np.int64), side="right") - 1, 0, len(bp) - 2)
        b0, b1, v0, v1 = bp[j], bp[j + 1], vals[j], vals[j + 1]
        width = b1 - b0
        num = (v0 * width + (v1 - v0) * (z - b0)) << num_shift
        y = _round_div(num, width << den_shift, self.fmt_state.rounding)
        return _overflow(y, self.fmt_state)


@dataclass(frozen=True)
class QuantizedReservoir:
    """Reservoir constants pre-quantized into the hardware formats."""

    params: ReservoirParams
    fmt_state: QFormat
    fmt_weight: QFormat
    feedback: int
    keep: int
    coupling: int
    masked_gain: tuple
    pwl: QuantizedPwl | None

    @classmethod
    def build(cls, params: ReservoirParams, mask: MaskVector,
              fmt_state: QFormat, fmt_weight: QFormat) -> "QuantizedReservoir":
        variant = params.nonlinearity.variant
        if variant not in (Variant.PIECEWISE_LINEAR, Variant.IDENTITY):
            raise InvalidConfigurationError(
                f"quantized datapath needs a piecewise-linear or identity node, got {variant.value}")
        if len(mask) != params.n_virtual:
            raise InvalidParameterError("mask length must equal n_virtual")
        fs = fmt_state.frac_bits
        q = lambda v: quantize_raw(v, fmt_state)  # noqa: E731
        gain = q(params.input_gain)
        masked = tuple(_mul(gain, fs, q(m), fs, fmt_state) for m in mask.values.tolist())
        pwl = None
        if variant is Variant.PIECEWISE_LINEAR:
            pwl = QuantizedPwl.from_table(params.nonlinearity.pwl, fmt_state, fmt_weight)
        return cls(params, fmt_state, fmt_weight, q(params.feedback_gain),
                   q(1.0 - params.cascade_coupling), q(params.cascade_coupling), masked, pwl)

    @functools.cached_property
    def _kernels(self):
        return _scalar_kernels(self.fmt_state)

    def step_raw(self, prev: list, u_raw: int) -> list:
        """One input step on raw state integers; returns the new raws as a list."""
        clip, mul = self._kernels
        pwl = self.pwl
        fb = self.feedback
        drive = [clip(mul(fb, xp) + mul(mg, u_raw)) for xp, mg in zip(prev, self.masked_gain)]
        f = pwl.eval_raw if pwl is not None else None
        if self.params.update_mode is UpdateMode.IDEAL_DELAY:
            return drive if f is None else [f(z) for z in drive]
        keep, coupling = self.keep, self.coupling
        out = []
        left = prev[-1]
        for d in drive:
            left = clip(mul(keep, d) + mul(coupling, left))
            if f is not None:
                left = f(left)
            out.append(left)
        return out


def run_sequence_q(params: ReservoirParams, mask: MaskVector, inputs,
                   fmt_state: QFormat, fmt_weight: QFormat, initial=None) -> FixedArray:
    """Quantized counterpart of ``reservoir.run_sequence``.

    Inputs, gains, mask, and every intermediate product live in ``fmt_state``;
    PWL knot values live in ``fmt_weight``. ``initial`` optionally gives the
    delay line's raw contents.
    """
    qres = QuantizedReservoir.build(params, mask, fmt_state, fmt_weight)
    inputs = np.asarray(inputs, dtype=float).ravel()
    prev = [0] * params.n_virtual if initial is None else [int(v) for v in initial]
    out = np.empty((inputs.size, params.n_virtual), dtype=np.int64)
    for t, u in enumerate(inputs.tolist()):
        prev = qres.step_raw(prev, quantize_raw(u, fmt_state))
        out[t] = prev
    return FixedArray(out, fmt_state)


# ---------------------------------------------------------------------------
# quantized readout and LMS trainer


def check_accumulator(fmt_weight: QFormat, fmt_accum: QFormat):
    if fmt_accum.frac_bits < fmt_weight.frac_bits or fmt_accum.int_bits < fmt_weight.int_bits:
        raise InvalidConfigurationError(
            f"accumulator {fmt_accum} is narrower than weight format {fmt_weight}")


def predict_raw(w_raw, fmt_weight: QFormat, x_raw, fmt_state: QFormat, fmt_accum: QFormat) -> int:
    """Fixed-point readout ``w . [x; 1]``; exact MAC, one rounding into ``fmt_accum``."""
    one = quantize_raw(1.0, fmt_state)
    acc = sum(int(w) * int(x) for w, x in zip(w_raw[:-1], x_raw)) + int(w_raw[-1]) * one
    return _convert(acc, fmt_weight.frac_bits + fmt_state.frac_bits, fmt_accum)


def predict_matrix_raw(w_raw, fmt_weight: QFormat, X_raw, fmt_state: QFormat,
                       fmt_accum: QFormat) -> np.ndarray:
    """Row-wise ``predict_raw`` over a matrix of raw states."""
    X = _wide(X_raw)
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    w = _wide(w_raw)
    one = quantize_raw(1.0, fmt_state)
    acc = X.dot(w[:-1]) + w[-1] * one
    return _narrow(_convert(acc, fmt_weight.frac_bits + fmt_state.frac_bits, fmt_accum))


@dataclass
class QLmsState:
    """LMS trainer with weights held in ``fmt_weight`` and updates formed in ``fmt_accum``."""

    weights_raw: list
    fmt_weight: QFormat
    fmt_accum: QFormat
    step_raw: int

    def __post_init__(self):
        check_accumulator(self.fmt_weight, self.fmt_accum)
        self.weights_raw = [int(w) for w in self.weights_raw]
        if self.step_raw <= 0:
            raise InvalidParameterError("quantized LMS step size rounds to zero or below")

    @classmethod
    def zeros(cls, n_virtual: int, step_size: float, fmt_weight: QFormat,
              fmt_accum: QFormat) -> "QLmsState":
        return cls([0] * (n_virtual + 1), fmt_weight, fmt_accum, quantize_raw(step_size, fmt_accum))

    @property
    def step_size(self) -> float:
        return math.ldexp(self.step_raw, -self.fmt_accum.frac_bits)

    def weights_real(self) -> np.ndarray:
        return np.ldexp(np.array(self.weights_raw, dtype=float), -self.fmt_weight.frac_bits)

    def predict_raw(self, x_raw, fmt_state: QFormat) -> int:
        return predict_raw(self.weights_raw, self.fmt_weight, x_raw, fmt_state, self.fmt_accum)

    def update(self, x_raw, fmt_state: QFormat, target: float) -> float:
        """One LMS step on a raw state; returns the pre-update error as a real."""
        fa, fw = self.fmt_accum, self.fmt_weight
        if len(x_raw) + 1 != len(self.weights_raw):
            raise InvalidParameterError("state length does not match weights")
        y = self.predict_raw(x_raw, fmt_state)
        err = _overflow(quantize_raw(target, fa) - y, fa)
        mu_err = _mul(self.step_raw, fa.frac_bits, err, fa.frac_bits, fa)
        phi = [int(x) for x in x_raw] + [quantize_raw(1.0, fmt_state)]
        fs = fmt_state.frac_bits
        new = []
        for w, p in zip(self.weights_raw, phi):
            acc = _overflow(_convert(w, fw.frac_bits, fa) + _mul(mu_err, fa.frac_bits, p, fs, fa), fa)
            new.append(_convert(acc, fa.frac_bits, fw))
        self.weights_raw = new
        return math.ldexp(err, -fa.frac_bits)


def train_online_q(kind: str, states_q: FixedArray, targets, washout: int,
                   fmt_weight: QFormat, fmt_accum: QFormat, step_size: float | None = None,
                   trainer: QLmsState | None = None):
    """Fixed-point online training; only LMS has a quantized form.

    Returns ``(trainer, errors)`` with the same trace convention as
    ``readout.train_online``.
    """
    from .readout import default_step_size

    if str(kind).lower() != "lms":
        raise InvalidConfigurationError("only the LMS trainer runs in fixed point")
    check_accumulator(fmt_weight, fmt_accum)
    targets = np.asarray(targets, dtype=float).ravel()
    T = targets.size
    if states_q.shape[0] != T:
        raise InvalidParameterError("states and targets must have the same length")
    if not 0 <= washout < T:
        raise InvalidParameterError("washout must satisfy 0 <= washout < T")
    if trainer is None:
        if step_size is None:
            step_size = default_step_size(states_q.to_real(), washout)
        trainer = QLmsState.zeros(states_q.shape[1], step_size, fmt_weight, fmt_accum)
    errors = np.empty(T - washout)
    rows = states_q.raw.tolist()
    for j, t in enumerate(range(washout, T)):
        errors[j] = trainer.update(rows[t], states_q.fmt, float(targets[t]))
    return trainer, errors


@dataclass(frozen=True)
class DatapathFormats:
    """State, weight, and accumulator formats of the emulated datapath.

    The weights carry eight integer bits: ridge/RLS readouts over ~100 nodes
    routinely exceed +-8, and a saturated weight ruins the readout.
    """

    state: QFormat = QFormat(16, 12)
    weight: QFormat = QFormat(20, 12)
    accum: QFormat = QFormat(32, 24)

    def __post_init__(self):
        check_accumulator(self.weight, self.accum)

    def with_frac_bits(self, frac_bits: int) -> "DatapathFormats":
        """Change state and weight precision, keeping their integer headroom."""
        return DatapathFormats(self.state.with_frac_bits(frac_bits),
                               self.weight.with_frac_bits(frac_bits), self.accum)

    def to_dict(self) -> dict:
        return {"state": self.state.to_dict(), "weight": self.weight.to_dict(),
                "accum": self.accum.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DatapathFormats":
        base = cls()
        return cls(QFormat.from_dict(d["state"]) if "state" in d else base.state,
                   QFormat.from_dict(d["weight"]) if "weight" in d else base.weight,
                   QFormat.from_dict(d["accum"]) if "accum" in d else base.accum)
