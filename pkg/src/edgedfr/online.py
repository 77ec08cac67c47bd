"""Sample-by-sample deployment mode: predict on every input, train when a target arrives.

``OnlineSystem`` performs exactly the arithmetic of the batch pipeline in
``bench.evaluate`` (same reservoir step, same trainer updates, same prediction
path), so streaming a dataset reproduces the batch predictions. Updates are
skipped for the first ``washout`` samples, as in batch training.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import fixedpoint as fx
from .config import SCHEMA_VERSION, Run, build_run
from .errors import InvalidConfigurationError
from .readout import LmsState, RlsState, feature_norm_sq, predict, step_size_from_norms
from .reservoir import DelayLine, step


class OnlineSystem:
    def __init__(self, run: Run, washout: int, config: Optional[dict] = None):
        self.run = run
        self.washout = int(washout)
        self.config = config
        self.t = 0
        self.trainer = None
        self._norms = []
        self._initial_weights = None
        p = run.params
        self.quantized = run.mode == "quantized"
        if self.quantized:
            self.qres = fx.QuantizedReservoir.build(p, run.mask, run.formats.state, run.formats.weight)
            self.state_raw = [0] * p.n_virtual
        else:
            self.delay = DelayLine(p.n_virtual)
        if run.trainer.kind == "rls" or run.trainer.step_size is not None:
            self._make_trainer(run.trainer.step_size)

    @classmethod
    def from_config(cls, cfg: dict) -> "OnlineSystem":
        return cls(build_run(cfg), cfg["task"]["washout"], cfg)

    # -- trainer -----------------------------------------------------------

    @property
    def _needs_step_size(self) -> bool:
        return self.trainer is None

    def _make_trainer(self, step_size):
        n = self.run.params.n_virtual
        tc = self.run.trainer
        f = self.run.formats
        if tc.kind == "rls":
            tr = RlsState.zeros(n, tc.forgetting, tc.init_scale)
        elif self.quantized:
            tr = fx.QLmsState.zeros(n, step_size, f.weight, f.accum)
        else:
            tr = LmsState.zeros(n, step_size)
        if self._initial_weights is not None:
            if isinstance(tr, fx.QLmsState):
                tr.weights_raw = [fx.quantize_raw(w, f.weight) for w in self._initial_weights]
            else:
                tr.weights = np.array(self._initial_weights, dtype=float)
        self.trainer = tr

    def weights(self) -> np.ndarray:
        n = self.run.params.n_virtual + 1
        if self.trainer is None:
            if self._initial_weights is not None:
                return np.array(self._initial_weights, dtype=float)
            return np.zeros(n)
        if isinstance(self.trainer, fx.QLmsState):
            return self.trainer.weights_real()
        return self.trainer.weights.copy()

    def weights_raw(self) -> list:
        if isinstance(self.trainer, fx.QLmsState):
            return list(self.trainer.weights_raw)
        return [fx.quantize_raw(w, self.run.formats.weight) for w in self.weights().tolist()]

    # -- streaming ---------------------------------------------------------

    def state_real(self) -> np.ndarray:
        if self.quantized:
            return np.ldexp(np.array(self.state_raw, dtype=float), -self.run.formats.state.frac_bits)
        return self.delay.buffer.copy()

    def feed(self, u: float, target: Optional[float] = None) -> float:
        """Advance one sample; return the pre-update prediction for it."""
        f = self.run.formats
        if self.quantized:
            self.state_raw = self.qres.step_raw(self.state_raw, fx.quantize_raw(u, f.state))
            x = None
        else:
            x = step(self.run.params, self.run.mask, self.delay, u)
        if self._needs_step_size and self.t < max(self.washout, 1):
            self._norms.append(feature_norm_sq(x if x is not None else self.state_real()))
        if self.quantized:
            y = fx.predict_raw(self.weights_raw(), f.weight, self.state_raw, f.state, f.accum)
            pred = math.ldexp(y, -f.accum.frac_bits)
        else:
            pred = predict(self.weights(), x)
        if target is not None and self.t >= self.washout:
            if self.trainer is None:
                self._make_trainer(step_size_from_norms(self._norms))
            if isinstance(self.trainer, fx.QLmsState):
                self.trainer.update(self.state_raw, f.state, float(target))
            elif self.quantized:
                self.trainer.update(self.state_real(), float(target))
            else:
                self.trainer.update(x, float(target))
        self.t += 1
        return pred

    # -- persistence -------------------------------------------------------

    def checkpoint(self) -> dict:
        """Everything needed to resume the stream exactly."""
        doc = {"schema": SCHEMA_VERSION, "kind": "checkpoint", "t": self.t,
               "config": self.config, "washout": self.washout,
               "mask": {"kind": self.run.mask.kind.value, "seed": self.run.mask.seed},
               "pending_norms": list(self._norms) if self.trainer is None else None,
               "initial_weights": self._initial_weights}
        if self.quantized:
            doc["delay_raw"] = list(self.state_raw)
            doc["delay_format"] = self.run.formats.state.to_dict()
        else:
            doc["delay"] = self.delay.buffer.tolist()
        tr = self.trainer
        if tr is None:
            doc["trainer"] = None
        elif isinstance(tr, RlsState):
            doc["trainer"] = {"kind": "rls", "weights": tr.weights.tolist(),
                              "p_matrix": tr.p_matrix.tolist(),
                              "forgetting": tr.forgetting, "init_scale": tr.init_scale}
        elif isinstance(tr, LmsState):
            doc["trainer"] = {"kind": "lms", "weights": tr.weights.tolist(), "step_size": tr.step_size}
        else:
            doc["trainer"] = {"kind": "lms-fixed", "weights_raw": tr.weights_raw,
                              "step_raw": tr.step_raw,
                              "weight_format": tr.fmt_weight.to_dict(),
                              "accum_format": tr.fmt_accum.to_dict()}
        doc["weights"] = weights_document(self)
        return doc

    @classmethod
    def from_checkpoint(cls, doc: dict, cfg: Optional[dict] = None) -> "OnlineSystem":
        if doc.get("kind") != "checkpoint":
            raise InvalidConfigurationError("not a stream checkpoint")
        stored = doc["config"]
        if cfg is not None and stored is not None:
            for key in ("reservoir", "trainer", "mode", "formats"):
                if cfg.get(key) != stored.get(key):
                    raise InvalidConfigurationError(f"checkpoint was made with a different {key!r} section")
        cfg = stored if stored is not None else cfg
        sys_ = cls(build_run(cfg), doc["washout"], cfg)
        if (sys_.run.mask.kind.value, sys_.run.mask.seed) != (doc["mask"]["kind"], doc["mask"]["seed"]):
            raise InvalidConfigurationError("checkpoint mask does not match the configuration")
        sys_.t = int(doc["t"])
        sys_._initial_weights = doc.get("initial_weights")
        if sys_.quantized:
            sys_.state_raw = [int(v) for v in doc["delay_raw"]]
        else:
            sys_.delay = DelayLine(sys_.run.params.n_virtual, doc["delay"])
            sys_.delay.t = sys_.t
        tr = doc["trainer"]
        if tr is None:
            sys_.trainer = None
            sys_._norms = [float(v) for v in doc.get("pending_norms") or []]
        elif tr["kind"] == "rls":
            sys_.trainer = RlsState(np.array(tr["weights"]), np.array(tr["p_matrix"]),
                                    tr["forgetting"], tr["init_scale"])
        elif tr["kind"] == "lms":
            sys_.trainer = LmsState(np.array(tr["weights"]), tr["step_size"])
        else:
            sys_.trainer = fx.QLmsState(tr["weights_raw"], fx.QFormat.from_dict(tr["weight_format"]),
                                        fx.QFormat.from_dict(tr["accum_format"]), int(tr["step_raw"]))
        return sys_

    def warm_start(self, weights_doc: dict):
        """Load readout weights only (reservoir and trainer statistics stay fresh)."""
        w = read_weights(weights_doc)
        if w.size != self.run.params.n_virtual + 1:
            raise InvalidConfigurationError(
                f"weights file has {w.size} entries, expected {self.run.params.n_virtual + 1}")
        self._initial_weights = w.tolist()
        if self.trainer is not None:
            tr = self.trainer
            if isinstance(tr, fx.QLmsState):
                tr.weights_raw = [fx.quantize_raw(v, tr.fmt_weight) for v in self._initial_weights]
            else:
                tr.weights = w.copy()


def weights_document(source) -> dict:
    """Portable weights file: decimal reals with an explicit length field.

    ``source`` is an ``OnlineSystem`` or an ``EvalReport``.
    """
    if isinstance(source, OnlineSystem):
        w = source.weights()
        raw = source.weights_raw() if source.quantized else None
        fmt = source.run.formats.weight.to_dict() if source.quantized else None
    else:
        w = np.asarray(source.weights)
        raw = source.weights_raw
        fmt = (source.config or {}).get("formats", {}).get("weight") if raw is not None else None
    doc = {"schema": SCHEMA_VERSION, "kind": "weights", "length": int(w.size),
           "weights": [float(v) for v in w]}
    if raw is not None:
        doc["weights_raw"] = [int(v) for v in raw]
        doc["format"] = fmt
    return doc


def read_weights(doc: dict) -> np.ndarray:
    if doc.get("kind") == "checkpoint":
        doc = doc["weights"]
    if doc.get("kind") != "weights":
        raise InvalidConfigurationError("not a weights document")
    w = np.array(doc["weights"], dtype=float)
    if w.size != doc["length"]:
        raise InvalidConfigurationError("weights length field does not match the array")
    if "weights_raw" in doc and doc.get("format"):
        fmt = fx.QFormat.from_dict(doc["format"])
        w = np.ldexp(np.array(doc["weights_raw"], dtype=float), -fmt.frac_bits)
    return w
