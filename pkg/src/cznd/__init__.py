"""Zeroing-neural-dynamics solvers for time-variant Sylvester-conjugate equations
``X(t) F(t) - A(t) conj(X(t)) = C(t)``."""
from .errors import (
    ComplexGainUnsupported,
    CzndError,
    DimensionError,
    EvalError,
    IntegratorError,
    MaxStepsExceeded,
    NumericalFailure,
    ParseError,
    ProblemFormatError,
    SingularMatrix,
    StepSizeUnderflow,
    UsageError,
)
from .harness import ExperimentSpec, RunReport, check_uniqueness, compare_models, gamma_sweep, run
from .linalg import CMatrix
from .models import MODEL_NAMES, Gain, build_model, flatten_state, lift_state
from .ode import IntegratorConfig, Trajectory, integrate
from .problem import TimeMatrix, TvsscmeProblem, build_wr_br, example3, load_problem, uniqueness

__version__ = "0.1.0"
