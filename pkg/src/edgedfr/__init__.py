"""Delayed-feedback reservoir computing for edge hardware.

A single nonlinear node with a delay loop emulates ``n_virtual`` neurons by
time multiplexing. A linear readout is trained online (RLS or LMS), and the
whole inference datapath can be run in bit-accurate fixed point.
"""

from .errors import (DegenerateTargetError, GeneratorError, InvalidConfigurationError,
                     InvalidParameterError, SingularSystemError, StateDivergenceError)
from .nonlinearity import NonlinearitySpec, PwlTable, Variant, build_pwl, evaluate as apply_nonlinearity
from .reservoir import (DelayLine, MaskKind, MaskVector, ReservoirParams, UpdateMode, mask_input,
                        new_mask, reset, run_sequence, step)
from .readout import (LmsState, RlsState, lms_update, predict, ridge_batch, rls_update,
                      train_online)
from .fixedpoint import (DatapathFormats, FixedArray, FixedVal, Overflow, QFormat, QLmsState,
                         QuantizedPwl, QuantizedReservoir, Rounding, fx_add, fx_mul, quantize,
                         quantize_array, run_sequence_q)
from .bench import (Dataset, EvalReport, Metrics, TrainerConfig, compute_metrics, evaluate,
                    evaluate_input_baseline, gen_mackey_glass, gen_narma10, read_csv, write_csv)
from .online import OnlineSystem

__version__ = "0.1.0"
