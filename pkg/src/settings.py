import logging
from dataclasses import dataclass

from src import __version__

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

VERSION = __version__

# Capacity caps
SECTOR_DIMENSION_CAP = 2**20
CLASSICAL_TABLE_CAP = 10**7
TENSOR_ORACLE_CAP = 4096


@dataclass(frozen=True)
class Tolerances:
    """
    Central record of numerical tolerances.

    Every module reads its defaults from DEFAULT_TOLERANCES so that a sweep can
    be re-run with tighter or looser checks by swapping one object.
    """

    normalization: float = 1e-10
    ket_norm: float = 1e-12
    hermitian: float = 1e-12
    trace: float = 1e-10
    positivity: float = 1e-10
    eigen_clamp: float = 1e-14
    bound_slack: float = 1e-10
    exact_table: float = 1e-12
    projector: float = 1e-12
    monotonicity: float = 1e-10
    grad_tol: float = 1e-9
    mc_sigmas: float = 4.0
    min_mc_samples: int = 1000
    moment_validation_samples: int = 1_000_000


DEFAULT_TOLERANCES = Tolerances()
