import logging
from dataclasses import dataclass
from functools import cached_property
from math import comb, perm
from typing import Union

import numpy as np
import pandas as pd

from src.exceptions import DomainError
from src.settings import DEFAULT_TOLERANCES
from src.symspace import (
    Ket,
    OneBodyOp,
    SymSector,
    TwoBodyOp,
    annihilator_power,
    default_coupling,
    get_sector,
    operator_from_json,
    operator_to_json,
    split_table,
)

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


@dataclass(frozen=True)
class DensityOp:
    """
    Hermitian, positive, trace-one matrix on a symmetric sector.

    Parameters:
    sector (SymSector): Sector the operator acts on.
    entries (np.ndarray): Square complex matrix in the occupation basis.
    validate (bool): Check the density-operator invariants on construction.
    """

    sector: SymSector
    entries: np.ndarray
    validate: bool = True

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        dim = self.sector.dimension
        if entries.shape != (dim, dim):
            logging.error(f"Density matrix shape {entries.shape} does not match sector dimension {dim}.")
            raise DomainError(f"Density matrix shape {entries.shape} does not match sector dimension {dim}.")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.validate:
            self.check()

    def check(self, tolerances=DEFAULT_TOLERANCES) -> None:
        """Raises DomainError unless Hermitian, positive and of unit trace."""
        residual = float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))
        if residual >= tolerances.hermitian:
            raise DomainError(f"Density matrix is not Hermitian (residual {residual}).")
        trace = float(np.trace(self.entries).real)
        if abs(trace - 1.0) > tolerances.trace:
            raise DomainError(f"Density matrix has trace {trace}.")
        smallest = float(self.eigenvalues[0]) if self.sector.dimension else 0.0
        if smallest < -tolerances.positivity:
            raise DomainError(f"Density matrix has negative eigenvalue {smallest}.")

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))

    @property
    def d(self) -> int:
        return self.sector.d

    @property
    def N(self) -> int:
        return self.sector.N

    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))

    def entropy(self, clamp: float = DEFAULT_TOLERANCES.eigen_clamp) -> float:
        """Von Neumann entropy -tr Γ log Γ."""
        return -x_log_x_trace(self.eigenvalues, clamp)

    def spectrum_frame(self) -> pd.DataFrame:
        """Eigenvalues in ascending order with header index,eigenvalue."""
        return pd.DataFrame({"index": np.arange(self.eigenvalues.shape[0]), "eigenvalue": self.eigenvalues})

    def to_json(self, trace_tol: float = DEFAULT_TOLERANCES.trace) -> dict:
        return operator_to_json(self.sector, self.entries, trace_tol=trace_tol)

    @classmethod
    def from_json(cls, payload: dict) -> "DensityOp":
        sector, matrix = operator_from_json(payload)
        return cls(sector, matrix)


def x_log_x_trace(eigenvalues: np.ndarray, clamp: float = DEFAULT_TOLERANCES.eigen_clamp) -> float:
    """sum lambda log lambda with eigenvalues below clamp set to zero."""
    lam = np.where(eigenvalues < clamp, 0.0, eigenvalues)
    positive = lam[lam > 0]
    return float(np.sum(positive * np.log(positive)))


def pure_state(ket: Ket) -> DensityOp:
    return DensityOp(ket.sector, ket.projector())


def maximally_mixed(sector: SymSector) -> DensityOp:
    return DensityOp(sector, np.eye(sector.dimension, dtype=complex) / sector.dimension)


def _as_matrix(op: Union[DensityOp, np.ndarray]) -> np.ndarray:
    return op.entries if isinstance(op, DensityOp) else np.asarray(op, dtype=complex)


# ---------------------------------------------------------------------------
# Partial traces
# ---------------------------------------------------------------------------
def reduce_operator(matrix: np.ndarray, d: int, N: int, n: int) -> np.ndarray:
    """
    Trace-preserving partial trace over the last N-n particles, occupation basis.

    gamma[m, m'] = binomial(N, n)^{-1} sum_r c(m, r+m) c(m', r+m') Γ[r+m, r+m']
    with r running over SymSector(d, N-n) and c(m, a) = sqrt(prod binomial(a_i, m_i)).
    Works for any square matrix, normalized or not.
    """
    if not 0 <= n <= N:
        logging.error(f"Partial trace order n={n} outside [0, {N}].")
        raise DomainError(f"Partial trace order n={n} outside [0, {N}].")
    matrix = np.asarray(matrix, dtype=complex)
    if n == N:
        return matrix.copy()
    idx, coef = split_table(d, n, N - n)
    block = matrix[idx[:, :, None], idx[:, None, :]]
    return np.einsum("rm,rmk,rk->mk", coef, block, coef) / comb(N, n)


def partial_trace(gamma: DensityOp, n: int) -> DensityOp:
    """
    n-particle reduced density matrix of an N-particle state.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    n (int): Kept particle number, 0 <= n <= N.

    Returns:
    DensityOp: Trace-one reduced matrix on SymSector(d, n).
    """
    reduced = reduce_operator(gamma.entries, gamma.d, gamma.N, n)
    return DensityOp(get_sector(gamma.d, n), 0.5 * (reduced + reduced.conj().T))


# ---------------------------------------------------------------------------
# Distances and diagnostics
# ---------------------------------------------------------------------------
def trace_norm_distance(a: Union[DensityOp, np.ndarray], b: Union[DensityOp, np.ndarray]) -> float:
    """Sum of absolute eigenvalues of the Hermitian difference a - b."""
    if isinstance(a, DensityOp) and isinstance(b, DensityOp) and a.sector != b.sector:
        logging.error(f"Sector mismatch: {a.sector} vs {b.sector}.")
        raise DomainError(f"Sector mismatch: {a.sector} vs {b.sector}.")
    A, B = _as_matrix(a), _as_matrix(b)
    if A.shape != B.shape:
        raise DomainError(f"Operator shapes {A.shape} and {B.shape} differ.")
    diff = A - B
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def wick_diagonal(gamma: DensityOp, v: np.ndarray, n: int) -> float:
    """
    ((N-n)!/N!) tr[a*(v)^n a(v)^n Γ], equal to <v^{⊗n}, γ^(n) v^{⊗n}>.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    v (np.ndarray): Normalized one-body vector.
    n (int): Order, n <= N.

    Returns:
    float: Non-negative diagonal value.
    """
    if n > gamma.N:
        raise DomainError(f"Wick order n={n} exceeds N={gamma.N}.")
    lowering = annihilator_power(v, gamma.sector, n)
    value = np.trace(lowering @ gamma.entries @ lowering.conj().T).real
    return float(value / perm(gamma.N, n))


def energy_from_rdms(h: OneBodyOp, w: TwoBodyOp, gamma: DensityOp, lam=None) -> float:
    """tr[h γ^(1)] + (lam (N-1)/2) tr[w γ^(2)], the energy per particle."""
    N = gamma.N
    lam = default_coupling(N) if lam is None else lam
    gamma1 = reduce_operator(gamma.entries, gamma.d, N, 1)
    energy = np.trace(h.entries @ gamma1).real
    if N >= 2:
        gamma2 = reduce_operator(gamma.entries, gamma.d, N, 2)
        energy += 0.5 * lam * (N - 1) * np.trace(w.entries @ gamma2).real
    return float(energy)


# ---------------------------------------------------------------------------
# Random states
# ---------------------------------------------------------------------------
def random_density(seed: int, sector: SymSector, rank: int) -> DensityOp:
    """
    Normalized Gram matrix of `rank` independent complex Gaussian vectors.

    Parameters:
    seed (int): Seed of numpy's default generator.
    sector (SymSector): Target sector.
    rank (int): Number of Gaussian vectors, 1 <= rank <= dimension.

    Returns:
    DensityOp: Random state, bit-identical for equal seeds.
    """
    if not 1 <= rank <= sector.dimension:
        logging.error(f"Rank {rank} outside [1, {sector.dimension}].")
        raise DomainError(f"Rank {rank} outside [1, {sector.dimension}].")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((sector.dimension, rank)) + 1j * rng.standard_normal((sector.dimension, rank))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityOp(sector, rho / np.trace(rho).real)


# Example usage
if __name__ == "__main__":
    state = random_density(0, get_sector(2, 3), rank=2)
    gamma1 = partial_trace(state, 1)
    logging.info(f"One-body eigenvalues: {gamma1.eigenvalues}")
    print(gamma1.spectrum_frame())
