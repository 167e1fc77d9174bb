import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from math import comb, factorial
from typing import List, Optional

import numpy as np
from scipy import stats

from src.exceptions import DomainError, InvariantViolation
from src.settings import DEFAULT_TOLERANCES
from src.states import DensityOp, reduce_operator, trace_norm_distance
from src.symspace import creator, get_sector, operator_to_json, product_embed

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector on C^d."""

    matrix: np.ndarray

    def __post_init__(self):
        P = np.array(self.matrix, dtype=complex)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DomainError(f"Projector must be square, got shape {P.shape}.")
        tol = DEFAULT_TOLERANCES.projector
        if np.max(np.abs(P - P.conj().T), initial=0.0) > tol or np.max(np.abs(P @ P - P), initial=0.0) > tol:
            logging.error("Matrix is not an orthogonal projector.")
            raise DomainError("Matrix is not an orthogonal projector (P^2 = P = P† fails).")
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)

    @classmethod
    def onto(cls, vectors: np.ndarray) -> "Projector":
        """Projector onto the span of the columns of vectors."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
        if vectors.shape[1] == 0:
            return cls(np.zeros((vectors.shape[0], vectors.shape[0]), dtype=complex))
        q, _ = np.linalg.qr(vectors)
        return cls(q @ q.conj().T)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _frame(self):
        values, vectors = np.linalg.eigh(0.5 * (self.matrix + self.matrix.conj().T))
        inside = values > 0.5
        return vectors[:, inside], vectors[:, ~inside]

    @property
    def range_basis(self) -> np.ndarray:
        return self._frame[0]

    @property
    def kernel_basis(self) -> np.ndarray:
        return self._frame[1]

    @property
    def rank(self) -> int:
        return self.range_basis.shape[1]

    def complement(self) -> "Projector":
        return Projector(np.eye(self.d) - self.matrix)


def random_projector(seed: int, d: int, rank: Optional[int] = None) -> Projector:
    """Projector onto the span of complex Gaussian vectors; rank drawn from 0..d when not given."""
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(0, d + 1)) if rank is None else rank
    if not 0 <= rank <= d:
        raise DomainError(f"Projector rank {rank} outside [0, {d}].")
    vectors = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    return Projector.onto(vectors)


def tensor_power_map(U: np.ndarray, N: int) -> np.ndarray:
    """
    Second quantization of a one-body map U: C^{d_in} -> C^{d_out} restricted to N particles.

    Parameters:
    U (np.ndarray): Matrix of shape (d_out, d_in).
    N (int): Particle number.

    Returns:
    np.ndarray: Matrix from SymSector(d_in, N) to SymSector(d_out, N) sending
    |m> to prod_i a*(U e_i)^{m_i} |0> / sqrt(prod_i m_i!).
    """
    U = np.asarray(U, dtype=complex)
    d_out, d_in = U.shape
    source = get_sector(d_in, N)
    target = get_sector(d_out, N)
    out = np.zeros((target.dimension, source.dimension), dtype=complex)
    if target.dimension == 0 or source.dimension == 0:
        return out
    raisers = [[creator(U[:, i], get_sector(d_out, level)) for level in range(1, N + 1)] for i in range(d_in)]
    for column, occupation in enumerate(source.basis):
        vector = np.ones(1, dtype=complex)
        level = 0
        for i, count in enumerate(occupation):
            for _ in range(count):
                vector = raisers[i][level] @ vector
                level += 1
        out[:, column] = vector / np.sqrt(float(np.prod([factorial(m) for m in occupation])))
    return out


@dataclass(frozen=True)
class FockBlocks:
    """
    Localized state ⊕_k G_k of an N-body state relative to a projector P.

    blocks[k] acts on SymSector(rank P, k) in the occupation basis built on
    P.range_basis.
    """

    projector: Projector
    N: int
    blocks: List[np.ndarray]

    @property
    def d(self) -> int:
        return self.projector.d

    def traces(self) -> np.ndarray:
        return np.array([np.trace(block).real if block.size else 0.0 for block in self.blocks])

    def embedded(self, k: int) -> np.ndarray:
        """Block k carried into SymSector(d, k) through the range basis of P."""
        lift = tensor_power_map(self.projector.range_basis, k)
        return lift @ self.blocks[k] @ lift.conj().T

    def check(self, tol: float = DEFAULT_TOLERANCES.trace) -> None:
        for k, block in enumerate(self.blocks):
            if block.size and np.linalg.eigvalsh(0.5 * (block + block.conj().T))[0] < -DEFAULT_TOLERANCES.positivity:
                raise InvariantViolation(f"Localized block {k} is not positive.")
        total = float(self.traces().sum())
        if abs(total - 1.0) > tol:
            raise InvariantViolation(f"Localized blocks carry total trace {total}.")

    def to_json(self) -> list:
        rank = self.projector.rank
        return [
            {"k": k, "trace": float(self.traces()[k]), "operator": operator_to_json(get_sector(rank, k), block)}
            for k, block in enumerate(self.blocks)
        ]


# ---------------------------------------------------------------------------
# Localization
# ---------------------------------------------------------------------------
def _block(rotated: np.ndarray, d: int, r: int, N: int, k: int) -> np.ndarray:
    """Q-traced block with k particles in the first r rotated modes."""
    p_sector = get_sector(r, k)
    if r == 0 or r == d:
        if (r == 0 and k == 0) or (r == d and k == N):
            return rotated.copy() if r == d else np.array([[np.trace(rotated)]], dtype=complex)
        return np.zeros((p_sector.dimension, p_sector.dimension), dtype=complex)
    q_sector = get_sector(d - r, N - k)
    occ = get_sector(d, N).occupation_array
    rows = np.nonzero(occ[:, :r].sum(axis=1) == k)[0]
    p_idx = p_sector.lookup(occ[rows, :r])
    q_idx = q_sector.lookup(occ[rows, r:])
    joint = np.zeros((p_sector.dimension, q_sector.dimension, p_sector.dimension, q_sector.dimension), dtype=complex)
    joint[p_idx[:, None], q_idx[:, None], p_idx[None, :], q_idx[None, :]] = rotated[np.ix_(rows, rows)]
    return np.einsum("aqbq->ab", joint)


def localize(gamma: DensityOp, P: Projector, threads: int = 1) -> FockBlocks:
    """
    Fock-space localization of Γ relative to P.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    P (Projector): Orthogonal projector on C^d.
    threads (int): Worker threads over k.

    Returns:
    FockBlocks: G_0..G_N, positive with total trace one.
    """
    if P.d != gamma.d:
        raise DomainError(f"Projector acts on C^{P.d}, state on d={gamma.d} modes.")
    d, N, r = gamma.d, gamma.N, P.rank
    W = np.hstack([P.range_basis, P.kernel_basis])
    rotate = tensor_power_map(W.conj().T, N)
    rotated = rotate @ gamma.entries @ rotate.conj().T
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        blocks = list(executor.map(lambda k: _block(rotated, d, r, N, k), range(N + 1)))
    result = FockBlocks(P, N, [0.5 * (b + b.conj().T) for b in blocks])
    result.check()
    return result


def block_masses(gamma: DensityOp, P: Projector) -> np.ndarray:
    return localize(gamma, P).traces()


def block_rdm(blocks: FockBlocks, n: int) -> np.ndarray:
    """
    n-particle reduced matrix of the localized state on SymSector(d, n):
    binomial(N, n)^{-1} sum_k binomial(k, n) tr_{n+1..k} G_k.
    """
    if not 0 <= n <= blocks.N:
        raise DomainError(f"Order n={n} outside [0, {blocks.N}].")
    r = blocks.projector.rank
    dim = get_sector(blocks.d, n).dimension
    total = np.zeros((dim, dim), dtype=complex)
    if r == 0:
        if n == 0:
            total += blocks.traces()[0]
        return total
    reduced = np.zeros((get_sector(r, n).dimension,) * 2, dtype=complex)
    for k in range(n, blocks.N + 1):
        block = blocks.blocks[k]
        if block.size:
            reduced += comb(k, n) * reduce_operator(block, r, k, n)
    lift = tensor_power_map(blocks.projector.range_basis, n)
    return lift @ reduced @ lift.conj().T / comb(blocks.N, n)


def localized_rdm(gamma: DensityOp, P: Projector, n: int) -> np.ndarray:
    """P^{⊗n} γ^(n) P^{⊗n} on SymSector(d, n)."""
    lift = tensor_power_map(P.matrix, n)
    return lift @ reduce_operator(gamma.entries, gamma.d, gamma.N, n) @ lift.conj().T


def check_consistency(gamma: DensityOp, P: Projector, n: int, strict: bool = True) -> float:
    """
    Trace distance between P^{⊗n} γ^(n) P^{⊗n} and the n-RDM of the localized state.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    P (Projector): Projector on C^d.
    n (int): Order, n <= N.
    strict (bool): Raise InvariantViolation when the residual reaches 1e-10.

    Returns:
    float: The residual.
    """
    if n > gamma.N:
        raise DomainError(f"Order n={n} exceeds N={gamma.N}.")
    residual = trace_norm_distance(localized_rdm(gamma, P, n), block_rdm(localize(gamma, P), n))
    if residual >= 1e-10:
        logging.error(f"Localization consistency residual {residual} at n={n}.")
        if strict:
            raise InvariantViolation(f"Localization consistency residual {residual} at n={n}.")
    return residual


def check_duality(gamma: DensityOp, P: Projector, strict: bool = True) -> float:
    """max_k |tr G_k^P - tr G_{N-k}^{1-P}|."""
    masses = block_masses(gamma, P)
    dual = block_masses(gamma, P.complement())
    deviation = float(np.max(np.abs(masses - dual[::-1])))
    if deviation >= 1e-12:
        logging.error(f"Localization duality deviation {deviation}.")
        if strict:
            raise InvariantViolation(f"Localization duality deviation {deviation}.")
    return deviation


# ---------------------------------------------------------------------------
# Structural checks
# ---------------------------------------------------------------------------
def binomial_mass_residual(u: np.ndarray, P: Projector, N: int) -> float:
    """Largest gap between block masses of |u^N> and the Binomial(N, |Pu|^2) law."""
    ket = product_embed(u, N)
    gamma = DensityOp(ket.sector, ket.projector())
    weight = float(np.linalg.norm(P.matrix @ np.asarray(u, dtype=complex)) ** 2)
    law = stats.binom.pmf(np.arange(N + 1), N, min(max(weight, 0.0), 1.0))
    return float(np.max(np.abs(block_masses(gamma, P) - law)))


def covariance_residual(gamma: DensityOp, P: Projector, U: np.ndarray) -> float:
    """
    Largest trace distance between the blocks of Γ(U) Γ Γ(U)† and Γ_k(U) G_k Γ_k(U)†,
    for a unitary U commuting with P; blocks compared in SymSector(d, k).
    """
    U = np.asarray(U, dtype=complex)
    if np.max(np.abs(U @ P.matrix - P.matrix @ U)) > 1e-10:
        raise DomainError("The unitary does not commute with the projector.")
    rotate = tensor_power_map(U, gamma.N)
    moved = localize(DensityOp(gamma.sector, rotate @ gamma.entries @ rotate.conj().T), P)
    original = localize(gamma, P)
    worst = 0.0
    for k in range(gamma.N + 1):
        lift = tensor_power_map(U, k)
        expected = lift @ original.embedded(k) @ lift.conj().T
        worst = max(worst, trace_norm_distance(moved.embedded(k), expected))
    return worst


def blocks_from_rdms(rdms: List[np.ndarray], P: Projector, N: int) -> List[np.ndarray]:
    """
    Recovers the blocks of a diagonal state from its P-localized reduced
    matrices for n = 0..N by back-substitution from n = N downwards.
    """
    r = P.rank
    blocks: List[np.ndarray] = [None] * (N + 1)
    for n in range(N, -1, -1):
        lift = tensor_power_map(P.range_basis, n)
        target = comb(N, n) * (lift.conj().T @ rdms[n] @ lift)
        for k in range(n + 1, N + 1):
            if blocks[k].size:
                target = target - comb(k, n) * reduce_operator(blocks[k], r, k, n)
        blocks[n] = target
    return blocks


def localization_uniqueness_check(gamma: DensityOp, P: Projector) -> float:
    """
    The P-localized reduced matrices of Γ determine a unique diagonal state:
    rebuilding blocks from them reproduces localize(Γ, P). Returns the largest
    block trace distance.
    """
    rdms = [localized_rdm(gamma, P, n) for n in range(gamma.N + 1)]
    rebuilt = blocks_from_rdms(rdms, P, gamma.N)
    blocks = localize(gamma, P).blocks
    return float(max(trace_norm_distance(a, b) if a.size else 0.0 for a, b in zip(rebuilt, blocks)))


# Example usage
if __name__ == "__main__":
    u = np.array([1.0, 0.0])
    sector = get_sector(2, 2)
    two_body = np.zeros(sector.dimension, dtype=complex)
    two_body[sector.index((1, 1))] = 1.0
    gamma = DensityOp(sector, np.outer(two_body, two_body.conj()))
    blocks = localize(gamma, Projector.onto(u[:, None]))
    print(json.dumps(blocks.to_json())[:200])
    logging.info(f"Block traces: {blocks.traces()}")
