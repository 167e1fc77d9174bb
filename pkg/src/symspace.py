"""
Occupation-number bases of bosonic sectors.

A sector SymSector(d, N) is the symmetric N-fold tensor power of C^d. Its
canonical basis is labelled by occupation multi-indices (n_1, ..., n_d) with
sum N, ordered lexicographically descending: for d=2, N=2 the order is
(2,0), (1,1), (0,2). The basis vector |n> is the normalized sum of all
distinct words with those occupations, so that the embedding of a product
vector u^{⊗N} has coordinates sqrt(N!/prod n_i!) * prod u_i^{n_i}.
"""

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from src.exceptions import CapacityError, DomainError
from src.settings import DEFAULT_TOLERANCES, SECTOR_DIMENSION_CAP, TENSOR_ORACLE_CAP

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

BASIS_ORDER = "lex-desc"


# ---------------------------------------------------------------------------
# Combinatorics
# ---------------------------------------------------------------------------
def sector_dimension(d: int, N: int, cap: int = SECTOR_DIMENSION_CAP) -> int:
    """
    Dimension of the bosonic N-particle sector over d modes.

    Parameters:
    d (int): Number of modes. Zero is accepted and only carries the vacuum.
    N (int): Particle number.
    cap (int): Largest admissible dimension.

    Returns:
    int: binomial(N+d-1, d-1).
    """
    if d < 0 or N < 0:
        logging.error(f"Invalid sector parameters d={d}, N={N}.")
        raise DomainError(f"Sector parameters must be non-negative, got d={d}, N={N}.")
    if d == 0:
        return 1 if N == 0 else 0
    dimension = math.comb(N + d - 1, d - 1)
    if dimension > cap:
        logging.error(f"Sector dimension {dimension} for d={d}, N={N} exceeds cap {cap}.")
        raise CapacityError(f"Sector dimension {dimension} for d={d}, N={N} exceeds cap {cap}.")
    return dimension


def occupations(d: int, N: int) -> Iterator[Tuple[int, ...]]:
    """Yields occupation multi-indices of SymSector(d, N) in lexicographic descending order."""
    if d == 0:
        if N == 0:
            yield ()
        return
    if d == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in occupations(d - 1, N - first):
            yield (first,) + rest


def log_multinomial(occ: np.ndarray) -> np.ndarray:
    """log(N!/prod n_i!) along the last axis of an integer array."""
    occ = np.asarray(occ)
    total = occ.sum(axis=-1)
    return gammaln(total + 1) - gammaln(occ + 1).sum(axis=-1)


# ---------------------------------------------------------------------------
# Sector
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SymSector:
    """Occupation-number basis of the symmetric N-particle sector over d modes."""

    d: int
    N: int

    def __post_init__(self):
        # validates and enforces the capacity cap
        sector_dimension(self.d, self.N)

    @cached_property
    def basis(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(occupations(self.d, self.N))

    @cached_property
    def occupation_array(self) -> np.ndarray:
        arr = np.array(self.basis, dtype=np.int64).reshape(len(self.basis), self.d)
        arr.setflags(write=False)
        return arr

    @cached_property
    def dimension(self) -> int:
        return len(self.basis)

    @cached_property
    def _keys(self) -> np.ndarray:
        # mixed-radix keys are strictly decreasing along the basis
        return self._encode(self.occupation_array)

    def _encode(self, occ: np.ndarray) -> np.ndarray:
        radix = self.N + 1
        weights = radix ** np.arange(self.d - 1, -1, -1, dtype=np.int64)
        return np.asarray(occ, dtype=np.int64).reshape(-1, self.d) @ weights

    def index(self, occupation) -> int:
        """Position of a single occupation multi-index."""
        return int(self.lookup(np.asarray(occupation)[None, :])[0])

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """
        Vectorized index lookup.

        Parameters:
        occ (np.ndarray): Integer array of shape (..., d) with rows summing to N.

        Returns:
        np.ndarray: Basis positions with shape occ.shape[:-1].
        """
        occ = np.asarray(occ, dtype=np.int64)
        if occ.shape[-1] != self.d or np.any(occ < 0) or np.any(occ.sum(axis=-1) != self.N):
            logging.error(f"Occupations do not belong to sector d={self.d}, N={self.N}.")
            raise DomainError(f"Occupations do not belong to sector d={self.d}, N={self.N}.")
        if self.d == 0:
            return np.zeros(occ.shape[:-1], dtype=np.int64)
        if (self.N + 1) ** (self.d - 1) >= 2**62:
            positions = {occupation: i for i, occupation in enumerate(self.basis)}
            flat = occ.reshape(-1, self.d)
            found = np.array([positions[tuple(int(v) for v in row)] for row in flat], dtype=np.int64)
            return found.reshape(occ.shape[:-1])
        keys = self._encode(occ)
        reversed_keys = self._keys[::-1]
        pos = np.searchsorted(reversed_keys, keys)
        return (self.dimension - 1 - pos).astype(np.int64).reshape(occ.shape[:-1])

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "basis_order": BASIS_ORDER}


@lru_cache(maxsize=None)
def get_sector(d: int, N: int) -> SymSector:
    """Shared SymSector instance for (d, N)."""
    return SymSector(d, N)


def _check_normalized(u: np.ndarray, tol: float) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 1:
        raise DomainError("One-body vectors must be one-dimensional.")
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > tol:
        logging.error(f"Vector norm {norm} is not 1 within {tol}.")
        raise DomainError(f"Expected a normalized vector, got norm {norm}.")
    return u


# ---------------------------------------------------------------------------
# Kets and one/two-body operators
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Ket:
    """Coordinates of a vector in an occupation basis."""

    sector: SymSector
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.sector.dimension,):
            raise DomainError(
                f"Ket has {amplitudes.shape} amplitudes, sector needs {self.sector.dimension}."
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = DEFAULT_TOLERANCES.ket_norm) -> bool:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0) < tol

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def to_json(self) -> dict:
        payload = self.sector.to_json()
        payload["re"] = self.amplitudes.real.tolist()
        payload["im"] = self.amplitudes.imag.tolist()
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "Ket":
        sector = get_sector(int(payload["d"]), int(payload["N"]))
        amplitudes = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
        return cls(sector, amplitudes)


@dataclass(frozen=True)
class OneBodyOp:
    """A d x d one-body operator h."""

    entries: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DomainError(f"One-body operator must be square, got shape {entries.shape}.")
        if self.hermitian:
            residual = np.max(np.abs(entries - entries.conj().T), initial=0.0)
            if residual >= DEFAULT_TOLERANCES.hermitian:
                logging.error(f"One-body operator is not Hermitian (residual {residual}).")
                raise DomainError(f"One-body operator is not Hermitian (residual {residual}).")
        object.__setattr__(self, "entries", entries)

    @property
    def d(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class TwoBodyOp:
    """A Hermitian two-body operator stored on the symmetric sector SymSector(d, 2)."""

    d: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        dim = sector_dimension(self.d, 2)
        if entries.shape != (dim, dim):
            raise DomainError(f"Two-body operator for d={self.d} must be {dim}x{dim}, got {entries.shape}.")
        residual = np.max(np.abs(entries - entries.conj().T), initial=0.0)
        if residual >= DEFAULT_TOLERANCES.hermitian:
            logging.error(f"Two-body operator is not Hermitian (residual {residual}).")
            raise DomainError(f"Two-body operator is not Hermitian (residual {residual}).")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zero(cls, d: int) -> "TwoBodyOp":
        dim = sector_dimension(d, 2)
        return cls(d, np.zeros((dim, dim), dtype=complex))

    @classmethod
    def from_tensor(cls, d: int, w_full: np.ndarray) -> "TwoBodyOp":
        """Compresses a d^2 x d^2 operator on C^d ⊗ C^d to the symmetric 2-sector."""
        V = symmetric_isometry(get_sector(d, 2))
        return cls(d, V.conj().T @ np.asarray(w_full, dtype=complex) @ V)

    def tensor(self) -> np.ndarray:
        """The operator on C^d ⊗ C^d, vanishing on the antisymmetric part, pair index p*d+q."""
        V = symmetric_isometry(get_sector(self.d, 2))
        return V @ self.entries @ V.conj().T


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------
def product_embed(u: np.ndarray, N: int, tol: float = DEFAULT_TOLERANCES.normalization) -> Ket:
    """
    Embeds u^{⊗N} into the occupation basis.

    Parameters:
    u (np.ndarray): Normalized complex d-vector.
    N (int): Particle number.
    tol (float): Normalization tolerance on u.

    Returns:
    Ket: Normalized ket on SymSector(d, N).
    """
    u = _check_normalized(u, tol)
    sector = get_sector(u.shape[0], N)
    return Ket(sector, _product_amplitudes(u, sector))


def _product_amplitudes(u: np.ndarray, sector: SymSector) -> np.ndarray:
    # powers[i, k] = u_i^k built by cumulative products so that 0^0 = 1
    powers = np.ones((sector.d, sector.N + 1), dtype=complex)
    if sector.N > 0:
        powers[:, 1:] = np.cumprod(np.repeat(u[:, None], sector.N, axis=1), axis=1)
    occ = sector.occupation_array
    monomials = np.prod(powers[np.arange(sector.d)[None, :], occ], axis=1)
    return np.exp(0.5 * log_multinomial(occ)) * monomials


def product_embed_many(points: np.ndarray, N: int) -> np.ndarray:
    """
    Product embeddings of many vectors at once.

    Parameters:
    points (np.ndarray): Array of shape (Q, d) with unit rows.
    N (int): Particle number.

    Returns:
    np.ndarray: Array of shape (Q, dim) whose rows are the coordinates of u_q^{⊗N}.
    """
    points = np.asarray(points, dtype=complex)
    sector = get_sector(points.shape[1], N)
    occ = sector.occupation_array
    powers = np.ones((points.shape[0], sector.d, N + 1), dtype=complex)
    if N > 0:
        powers[:, :, 1:] = np.cumprod(np.repeat(points[:, :, None], N, axis=2), axis=2)
    monomials = np.ones((points.shape[0], sector.dimension), dtype=complex)
    for i in range(sector.d):
        monomials *= powers[:, i, occ[:, i]]
    return monomials * np.exp(0.5 * log_multinomial(occ))[None, :]


@lru_cache(maxsize=64)
def symmetric_isometry(sector: SymSector, cap: int = TENSOR_ORACLE_CAP) -> np.ndarray:
    """
    Isometry V from the occupation basis into (C^d)^{⊗N}.

    Column n of V is the normalized sum of the words with occupations n, rows are
    words in C order. V†V is the identity and V V† the symmetrizer.
    """
    d, N = sector.d, sector.N
    if N == 0:
        V = np.ones((1, 1), dtype=complex)
        V.setflags(write=False)
        return V
    rows = d**N
    if rows > cap:
        logging.error(f"Full tensor space d^N={rows} exceeds oracle cap {cap}.")
        raise CapacityError(f"Full tensor space d^N={rows} exceeds oracle cap {cap}.")
    words = np.indices((d,) * N).reshape(N, -1).T
    counts = np.stack([(words == i).sum(axis=1) for i in range(d)], axis=1)
    columns = sector.lookup(counts)
    V = np.zeros((rows, sector.dimension), dtype=complex)
    V[np.arange(rows), columns] = np.exp(-0.5 * log_multinomial(counts))
    V.setflags(write=False)
    return V


# ---------------------------------------------------------------------------
# Split tables (shared by partial traces and identity padding)
# ---------------------------------------------------------------------------
@lru_cache(maxsize=256)
def split_table(d: int, n: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Index and coefficient tables splitting SymSector(d, n+k) into (k, n) parts.

    Parameters:
    d (int): Number of modes.
    n (int): Kept particle number.
    k (int): Traced (or padded) particle number.

    Returns:
    Tuple[np.ndarray, np.ndarray]: idx[r, m] is the position of r+m in sector n+k
    and coef[r, m] = sqrt(prod_i binomial((r+m)_i, m_i)), both of shape (D_k, D_n).
    """
    outer = get_sector(d, n + k)
    kept = get_sector(d, n).occupation_array
    rest = get_sector(d, k).occupation_array
    total = rest[:, None, :] + kept[None, :, :]
    idx = outer.lookup(total)
    log_coef = gammaln(total + 1) - gammaln(kept[None, :, :] + 1) - gammaln(rest[:, None, :] + 1)
    coef = np.exp(0.5 * log_coef.sum(axis=-1))
    idx.setflags(write=False)
    coef.setflags(write=False)
    return idx, coef


# ---------------------------------------------------------------------------
# Ladder operators
# ---------------------------------------------------------------------------
@lru_cache(maxsize=128)
def mode_annihilators(d: int, N: int) -> np.ndarray:
    """
    Matrices of a(e_i) from SymSector(d, N) to SymSector(d, N-1).

    Returns:
    np.ndarray: Read-only array of shape (d, dim(N-1), dim(N)).
    """
    if N < 1:
        logging.error("Annihilator requested on the vacuum sector.")
        raise DomainError("Annihilators need N >= 1.")
    source = get_sector(d, N)
    target = get_sector(d, N - 1)
    occ = source.occupation_array
    A = np.zeros((d, target.dimension, source.dimension), dtype=complex)
    for i in range(d):
        columns = np.nonzero(occ[:, i] > 0)[0]
        lowered = occ[columns].copy()
        lowered[:, i] -= 1
        A[i, target.lookup(lowered), columns] = np.sqrt(occ[columns, i])
    A.setflags(write=False)
    return A


def annihilator(f: np.ndarray, sector: SymSector) -> np.ndarray:
    """
    Matrix of a(f) = sum_i conj(f_i) a(e_i) from sector N to sector N-1.

    Parameters:
    f (np.ndarray): Complex d-vector; a(f) is antilinear in f.
    sector (SymSector): Source sector, N >= 1.

    Returns:
    np.ndarray: Matrix of shape (dim(N-1), dim(N)).
    """
    f = np.asarray(f, dtype=complex)
    if sector.N < 1:
        logging.error("Annihilator requested on the vacuum sector.")
        raise DomainError("Annihilators need N >= 1.")
    return np.tensordot(f.conj(), mode_annihilators(sector.d, sector.N), axes=(0, 0))


def creator(f: np.ndarray, sector: SymSector) -> np.ndarray:
    """Matrix of a*(f) = a(f)† from sector N-1 into sector N."""
    return annihilator(f, sector).conj().T


def annihilator_power(f: np.ndarray, sector: SymSector, n: int) -> np.ndarray:
    """Matrix of a(f)^n from sector N to sector N-n."""
    if n > sector.N:
        raise DomainError(f"Cannot remove {n} particles from N={sector.N}.")
    result = np.eye(sector.dimension, dtype=complex)
    for step in range(n):
        result = annihilator(f, get_sector(sector.d, sector.N - step)) @ result
    return result


def ccr_residual(f: np.ndarray, g: np.ndarray, sector: SymSector) -> float:
    """Max-entry residual of [a(f), a*(g)] - <f,g> Id on a sector."""
    up = get_sector(sector.d, sector.N + 1)
    lhs = annihilator(f, up) @ creator(g, up)
    if sector.N > 0:
        lhs = lhs - creator(g, sector) @ annihilator(f, sector)
    expected = np.vdot(f, g) * np.eye(sector.dimension)
    return float(np.max(np.abs(lhs - expected), initial=0.0))


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------
def default_coupling(N: int) -> float:
    """Mean-field coupling 1/(N-1); zero for a single particle."""
    return 1.0 / (N - 1) if N >= 2 else 0.0


def assemble_hamiltonian(
    h: OneBodyOp, w: TwoBodyOp, N: int, lam: Optional[float] = None
) -> np.ndarray:
    """
    Mean-field Hamiltonian sum_j h_j + lam * sum_{i<j} w_ij on SymSector(d, N).

    The one-body part is sum_pq h_pq a*_p a_q and the two-body part is
    (lam/2) sum w~_{pq,rs} a*_p a*_q a_s a_r, with w~ the two-body operator on
    C^d ⊗ C^d.

    Parameters:
    h (OneBodyOp): One-body operator.
    w (TwoBodyOp): Two-body operator on the symmetric 2-sector.
    N (int): Particle number, N >= 1.
    lam (Optional[float]): Coupling, defaults to 1/(N-1).

    Returns:
    np.ndarray: Hermitian matrix on SymSector(d, N).
    """
    if N < 1:
        logging.error(f"Hamiltonian requested for N={N}.")
        raise DomainError("The Hamiltonian needs N >= 1.")
    d = h.d
    if w.d != d:
        raise DomainError(f"One-body d={d} and two-body d={w.d} differ.")
    lam = default_coupling(N) if lam is None else float(lam)

    A = mode_annihilators(d, N)
    H = np.tensordot(A.conj(), np.tensordot(h.entries, A, axes=(1, 0)), axes=([0, 1], [0, 1]))

    if N >= 2 and lam != 0.0:
        A_lower = mode_annihilators(d, N - 1)
        # pairs[r, s] = a_s a_r
        pairs = np.einsum("sij,rjk->rsik", A_lower, A).reshape(d * d, A_lower.shape[1], A.shape[2])
        weighted = np.tensordot(w.tensor(), pairs, axes=(1, 0))
        H = H + 0.5 * lam * np.tensordot(pairs.conj(), weighted, axes=([0, 1], [0, 1]))
    return 0.5 * (H + H.conj().T)


# ---------------------------------------------------------------------------
# Random operators and serialization
# ---------------------------------------------------------------------------
def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Hermitian matrix with complex Gaussian entries."""
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (X + X.conj().T)


def random_problem_operators(seed: int, d: int) -> Tuple[OneBodyOp, TwoBodyOp]:
    """Random Hermitian (h, w) pair for a given seed."""
    rng = np.random.default_rng(seed)
    h = OneBodyOp(random_hermitian(rng, d))
    w = TwoBodyOp(d, random_hermitian(rng, sector_dimension(d, 2)))
    return h, w


def operator_to_json(sector: SymSector, matrix: np.ndarray, **extra) -> dict:
    """Operator payload {"d","N","basis_order","re","im"} in row-major order."""
    matrix = np.asarray(matrix, dtype=complex)
    payload = sector.to_json()
    payload["re"] = matrix.real.tolist()
    payload["im"] = matrix.imag.tolist()
    payload.update(extra)
    return payload


def operator_from_json(payload: dict) -> Tuple[SymSector, np.ndarray]:
    if payload.get("basis_order", BASIS_ORDER) != BASIS_ORDER:
        raise DomainError(f"Unsupported basis order {payload.get('basis_order')}.")
    sector = get_sector(int(payload["d"]), int(payload["N"]))
    matrix = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
    return sector, matrix.reshape(sector.dimension, sector.dimension)


# Example usage
if __name__ == "__main__":
    sector = get_sector(2, 3)
    logging.info(f"Basis of d=2, N=3: {sector.basis}")
    h = OneBodyOp(np.diag([0.0, 1.0]))
    w = TwoBodyOp.from_tensor(2, np.diag([2.0, 0.0, 0.0, 0.0]))
    H = assemble_hamiltonian(h, w, 3, lam=0.5)
    print(json.dumps({"diagonal": np.diag(H).real.tolist()}))
