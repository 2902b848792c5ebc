"""Structure-preserving model reduction for frequency-affine second-order systems."""

from somor.errors import SomorError
from somor.metrics import FrequencyGrid, linf_rel_error, morscore, sweep
from somor.reduce import ReducedModel, make_pair, project
from somor.system import (AffineTerm, Coefficient, StructuredSystem, SyntheticModelSpec,
                          eval_transfer, generate_synthetic)

__version__ = "0.1.0"

__all__ = [
    "AffineTerm", "Coefficient", "FrequencyGrid", "ReducedModel", "SomorError",
    "StructuredSystem", "SyntheticModelSpec", "eval_transfer", "generate_synthetic",
    "linf_rel_error", "make_pair", "morscore", "project", "sweep",
]
