"""Exception types raised by edgedfr."""


class InvalidParameterError(ValueError):
    """A parameter violates an operation's precondition."""


class InvalidConfigurationError(ValueError):
    """A combination of settings cannot be executed (e.g. quantized mode with tanh)."""


class StateDivergenceError(ArithmeticError):
    """A reservoir state, weight, or trainer intermediate became non-finite.

    Attributes:
        step: input-step index at which the divergence was detected.
        node: virtual-node index, when the divergence happened inside the reservoir.
        phase: pipeline phase ("states", "train", "test") if known.
    """

    def __init__(self, message, step=None, node=None, phase=None):
        self.step = step
        self.node = node
        self.phase = phase
        parts = [message]
        if phase is not None:
            parts.append(f"phase={phase}")
        if step is not None:
            parts.append(f"step={step}")
        if node is not None:
            parts.append(f"node={node}")
        super().__init__(" ".join(parts))


class SingularSystemError(ArithmeticError):
    """Unregularized least-squares system is rank deficient."""


class DegenerateTargetError(ValueError):
    """Target series is constant, so normalized errors are undefined."""


class GeneratorError(RuntimeError):
    """A benchmark generator produced non-finite or out-of-range values."""
