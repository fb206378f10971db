"""Second-order Liouville dynamic mode decomposition with occupation kernels."""

from .decomposition import (
    Reconstruction,
    ReconstructionRequest,
    SodmdModel,
    eigenfunction_at,
    fit,
    reconstruct,
    reconstruct_trajectory,
)
from .errors import (
    DegenerateDataError,
    DivergenceError,
    FormatError,
    InputError,
    NumericalError,
    StateError,
)
from .kernels import Family, KernelSpec
from .quadrature import TimeGrid, make_rule
from .signals import Dataset, Trajectory, load_csv, load_dataset, save_csv

__version__ = "0.1.0"
