"""Matrix Laguerre (complex Wishart) processes: matrix hypergeometric
functions, simulation schemes and closed-form laws."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .mathyp import HermitianMatrix, hyp_matrix, hyp_two_matrix  # noqa: E402
from .process import PathSet, SimConfig, simulate  # noqa: E402
from .laws import LawQuery, laplace_transform, transition_density  # noqa: E402
from .report import McReport  # noqa: E402
from .scalarfn import HypParams  # noqa: E402

__all__ = [
    "BACKEND", "HermitianMatrix", "HypParams", "LawQuery", "McReport", "PathSet", "SimConfig",
    "hyp_matrix", "hyp_two_matrix", "laplace_transform", "simulate", "transition_density",
]
