"""Newton method for sparsity-constrained logistic regression (NSLR)."""
from .errors import ConditionError, NumericalError, ParseError
from .model import Dataset, ModelConstants
from .solver import SolverConfig, SolverReport, iht_solve, nslr_solve
from .stationarity import Iterate, Stationarity

__all__ = [
    "ConditionError",
    "NumericalError",
    "ParseError",
    "Dataset",
    "ModelConstants",
    "SolverConfig",
    "SolverReport",
    "iht_solve",
    "nslr_solve",
    "Iterate",
    "Stationarity",
]
__version__ = "0.1.0"
