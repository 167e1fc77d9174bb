import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import comb, factorial
from typing import List, Optional

import numpy as np

from src.exceptions import CapacityError, DomainError, InvariantViolation
from src.settings import DEFAULT_TOLERANCES, SECTOR_DIMENSION_CAP
from src.sphere import ensure_moments_validated, log_sphere_moment, sphere_quadrature
from src.states import DensityOp, reduce_operator, trace_norm_distance
from src.symspace import (
    _check_normalized,
    annihilator_power,
    get_sector,
    log_multinomial,
    product_embed,
    product_embed_many,
    sector_dimension,
    split_table,
)

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


# ---------------------------------------------------------------------------
# Lower symbols
# ---------------------------------------------------------------------------
def lower_symbol_value(gamma: DensityOp, u: np.ndarray) -> float:
    """
    Coherent-state lower symbol dim(H_s^N) <u^{⊗N}, Γ u^{⊗N}>.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    u (np.ndarray): Normalized complex d-vector.

    Returns:
    float: Non-negative symbol value.
    """
    psi = product_embed(u, gamma.N).amplitudes
    value = np.vdot(psi, gamma.entries @ psi).real
    return float(gamma.sector.dimension * max(value, 0.0))


@dataclass(frozen=True)
class LowerSymbol:
    """The density u -> dim <u^{⊗N}, Γ u^{⊗N}> of the CKMR measure of Γ."""

    source: DensityOp

    def __call__(self, u: np.ndarray) -> float:
        return lower_symbol_value(self.source, u)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Symbol at many unit vectors, rows of points."""
        psi = product_embed_many(points, self.source.N)
        overlaps = np.einsum("qa,ab,qb->q", psi.conj(), self.source.entries, psi).real
        return self.source.sector.dimension * np.clip(overlaps, 0.0, None)

    def sphere_average(self) -> float:
        """Exact average over the uniform sphere measure from closed-form moments."""
        sector = self.source.sector
        occ = sector.occupation_array
        # E[conj(psi_a) psi_b] = delta_ab M_a E|u^a|^2
        weights = np.exp(log_multinomial(occ) + log_sphere_moment(sector.d, occ))
        return float(sector.dimension * np.sum(weights * np.diag(self.source.entries).real))


def schur_resolution(d: int, N: int) -> np.ndarray:
    """dim(H_s^N) times the sphere integral of |u^{⊗N}><u^{⊗N}|, from exact moments."""
    ensure_moments_validated(d)
    sector = get_sector(d, N)
    occ = sector.occupation_array
    diagonal = np.exp(log_multinomial(occ) + log_sphere_moment(d, occ))
    return sector.dimension * np.diag(diagonal).astype(complex)


def probe_directions(d: int, count: int, seed: int = 7) -> np.ndarray:
    """Seeded unit probe vectors from complex Gaussians; a fixed seed gives a fixed set."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def lower_symbol_reconstruct(symbol_values: np.ndarray, d: int, N: int, probes: np.ndarray) -> np.ndarray:
    """
    Recovers a Hermitian operator X on SymSector(d, N) from the values
    <u^{⊗N}, X u^{⊗N}> at probe directions u by least squares.

    Parameters:
    symbol_values (np.ndarray): Diagonal values at each probe (without the dim factor).
    d (int): Mode count.
    N (int): Particle number.
    probes (np.ndarray): Probe directions of shape (Q, d), Q >= dim^2.

    Returns:
    np.ndarray: Reconstructed Hermitian matrix.
    """
    dim = sector_dimension(d, N)
    psi = product_embed_many(probes, N)
    if psi.shape[0] < dim * dim:
        raise DomainError(f"Need at least {dim * dim} probes, got {psi.shape[0]}.")
    upper = np.triu_indices(dim, k=1)
    diag_part = np.abs(psi) ** 2
    cross = psi.conj()[:, upper[0]] * psi[:, upper[1]]
    design = np.hstack([diag_part, 2.0 * cross.real, -2.0 * cross.imag])
    params, _, rank, _ = np.linalg.lstsq(design, np.asarray(symbol_values, dtype=float), rcond=None)
    if rank < dim * dim:
        logging.warning(f"Probe design has rank {rank} < {dim * dim}; reconstruction is not unique.")
    X = np.diag(params[:dim]).astype(complex)
    off = params[dim : dim + len(upper[0])] + 1j * params[dim + len(upper[0]) :]
    X[upper] = off
    X[(upper[1], upper[0])] = off.conj()
    return X


def injectivity_residual(X: np.ndarray, d: int, N: int) -> float:
    """Max-entry error of reconstructing X from its diagonal values at dim^2 probes."""
    dim = sector_dimension(d, N)
    probes = probe_directions(d, dim * dim)
    psi = product_embed_many(probes, N)
    values = np.einsum("qa,ab,qb->q", psi.conj(), X, psi).real
    return float(np.max(np.abs(lower_symbol_reconstruct(values, d, N, probes) - X)))


# ---------------------------------------------------------------------------
# Chiribella's formula
# ---------------------------------------------------------------------------
def pad_operator(gamma: np.ndarray, d: int, ell: int, n: int) -> np.ndarray:
    """
    gamma ⊗_s Id^{⊗(n-ell)} on SymSector(d, n): the sum over ell-subsets of the
    n slots of gamma acting on the subset, restricted to the symmetric sector.
    """
    if ell > n:
        logging.error(f"Cannot pad order {ell} up to {n}.")
        raise DomainError(f"Cannot pad order {ell} up to {n}.")
    idx, coef = split_table(d, ell, n - ell)
    contributions = coef[:, :, None] * np.asarray(gamma, dtype=complex)[None, :, :] * coef[:, None, :]
    out = np.zeros((sector_dimension(d, n), sector_dimension(d, n)), dtype=complex)
    np.add.at(out, (idx[:, :, None], idx[:, None, :]), contributions)
    return out


def sym_pad(gamma: DensityOp, n: int) -> np.ndarray:
    """Identity padding of a state on sector ell to a Hermitian operator on sector n."""
    return pad_operator(gamma.entries, gamma.d, gamma.N, n)


def _ckmr_normalization(N: int, n: int, d: int) -> int:
    return comb(N + n + d - 1, n)


class CKMRStrategy(ABC):
    """Computes the n-particle reduced matrix of the CKMR state of Γ."""

    @abstractmethod
    def rdm(self, gamma: DensityOp, n: int) -> DensityOp:
        pass


class ChiribellaFormula(CKMRStrategy):
    """Binomially weighted sum of identity-padded reduced matrices."""

    def rdm(self, gamma: DensityOp, n: int) -> DensityOp:
        d, N = gamma.d, gamma.N
        if n > N:
            raise DomainError(f"Order n={n} exceeds N={N}.")
        normalization = _ckmr_normalization(N, n, d)
        total = np.zeros((sector_dimension(d, n),) * 2, dtype=complex)
        for ell in range(n + 1):
            reduced = reduce_operator(gamma.entries, d, N, ell)
            total += (comb(N, ell) / normalization) * pad_operator(reduced, d, ell, n)
        return DensityOp(get_sector(d, n), 0.5 * (total + total.conj().T))


class MomentOracle(CKMRStrategy):
    """
    Exact integration of dim ∫ |u^{⊗n}><u^{⊗n}| <u^{⊗N}, Γ u^{⊗N}> du with
    closed-form sphere moments. Gated by the Monte Carlo moment validation.
    """

    def rdm(self, gamma: DensityOp, n: int) -> DensityOp:
        d, N = gamma.d, gamma.N
        if n > N:
            raise DomainError(f"Order n={n} exceeds N={N}.")
        try:
            sector_dimension(d, N + n, cap=SECTOR_DIMENSION_CAP)
        except CapacityError:
            logging.error(f"Moment oracle sector d={d}, N+n={N + n} exceeds the cap.")
            raise
        ensure_moments_validated(d)

        big = get_sector(d, N)
        small = get_sector(d, n)
        occ_n = small.occupation_array
        occ_N = big.occupation_array
        log_m_n = log_multinomial(occ_n)
        log_m_N = log_multinomial(occ_N)

        # entry [m, m'] collects b with a = m + b - m' >= 0
        a = occ_n[:, None, None, :] + occ_N[None, None, :, :] - occ_n[None, :, None, :]
        valid = np.all(a >= 0, axis=-1)
        m_idx, mp_idx, b_idx = np.nonzero(valid)
        a_idx = big.lookup(a[m_idx, mp_idx, b_idx])
        log_weight = (
            0.5 * (log_m_n[m_idx] + log_m_n[mp_idx] + log_m_N[a_idx] + log_m_N[b_idx])
            + log_sphere_moment(d, occ_n[m_idx] + occ_N[b_idx])
        )
        values = big.dimension * np.exp(log_weight) * gamma.entries[a_idx, b_idx]
        out = np.zeros((small.dimension, small.dimension), dtype=complex)
        np.add.at(out, (m_idx, mp_idx), values)
        return DensityOp(small, 0.5 * (out + out.conj().T))


class QuadratureMixing(CKMRStrategy):
    """n-RDM of the CKMR measure discretized on an exact sphere quadrature."""

    def rdm(self, gamma: DensityOp, n: int) -> DensityOp:
        return ckmr_mixing(gamma, degree=gamma.N + n).rdm(n)


class CKMRReconstructor:
    """Context class selecting how the CKMR reduced matrix is computed."""

    def __init__(self, strategy: CKMRStrategy):
        self._strategy = strategy

    def set_strategy(self, strategy: CKMRStrategy):
        logging.info(f"Switching CKMR strategy to {type(strategy).__name__}.")
        self._strategy = strategy

    def reconstruct(self, gamma: DensityOp, n: int) -> DensityOp:
        return self._strategy.rdm(gamma, n)


def ckmr_rdm(gamma: DensityOp, n: int) -> DensityOp:
    """Chiribella's formula for the n-RDM of the CKMR state."""
    return ChiribellaFormula().rdm(gamma, n)


def moment_oracle_rdm(gamma: DensityOp, n: int) -> DensityOp:
    """Moment-integrated n-RDM of the CKMR state."""
    return MomentOracle().rdm(gamma, n)


# ---------------------------------------------------------------------------
# Error bounds
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DefinettiGap:
    distance: float
    bound_4_1: float
    bound_sharp: float
    violated: bool


def definetti_gap(gamma: DensityOp, n: int, strict: bool = True) -> DefinettiGap:
    """
    Trace distance between γ^(n) and the CKMR n-RDM with the two error bounds.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    n (int): Order, n <= N.
    strict (bool): Raise InvariantViolation when 2n(d+2n)/N is exceeded.

    Returns:
    DefinettiGap: distance, bound 2n(d+2n)/N, sharper bound 2nd/N and the violation flag.
    """
    d, N = gamma.d, gamma.N
    if n > N:
        raise DomainError(f"Order n={n} exceeds N={N}.")
    reduced = reduce_operator(gamma.entries, d, N, n)
    distance = trace_norm_distance(reduced, ckmr_rdm(gamma, n))
    bound = 2.0 * n * (d + 2.0 * n) / N
    sharp = 2.0 * n * d / N
    violated = distance > bound + DEFAULT_TOLERANCES.bound_slack
    if violated:
        logging.error(f"de Finetti bound violated: distance {distance} > {bound} (d={d}, N={N}, n={n}).")
        if strict:
            raise InvariantViolation(f"de Finetti bound violated: distance {distance} > {bound}.")
    return DefinettiGap(distance=distance, bound_4_1=bound, bound_sharp=sharp, violated=bool(violated))


def product_state_distance(d: int, N: int, n: int) -> float:
    """Exact gap for a pure product input: 2(1 - prod_{j=1..n} (N+j)/(N+j+d-1))."""
    ratio = 1.0
    for j in range(1, n + 1):
        ratio *= (N + j) / (N + j + d - 1)
    return 2.0 * (1.0 - ratio)


# ---------------------------------------------------------------------------
# Anti-Wick quantization and normal ordering
# ---------------------------------------------------------------------------
def anti_wick_diagonal(gamma: DensityOp, v: np.ndarray, n: int) -> float:
    """
    ((N+d-1)!/(N+n+d-1)!) tr[a(v)^n a*(v)^n Γ].

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    v (np.ndarray): Normalized one-body vector.
    n (int): Order.

    Returns:
    float: The diagonal <v^{⊗n}, ckmr_rdm(Γ, n) v^{⊗n}>.
    """
    v = _check_normalized(v, DEFAULT_TOLERANCES.normalization)
    d, N = gamma.d, gamma.N
    raised = get_sector(d, N + n)
    lowering = annihilator_power(v, raised, n)  # a(v)^n : N+n -> N
    value = np.trace(lowering @ lowering.conj().T @ gamma.entries).real
    prefactor = 1.0
    for j in range(1, n + 1):
        prefactor /= N + d - 1 + j
    return float(prefactor * value)


@dataclass(frozen=True)
class NormalOrderCoeffs:
    n: int
    coeffs: List[int]


def normal_order_coeffs(n: int) -> NormalOrderCoeffs:
    """Coefficients c_{n,k} = binomial(n,k) n!/k! of a^n a*^n = sum_k c_{n,k} a*^k a^k."""
    if n < 0:
        raise DomainError(f"Order must be non-negative, got {n}.")
    return NormalOrderCoeffs(n=n, coeffs=[comb(n, k) * factorial(n) // factorial(k) for k in range(n + 1)])


def ladder_matrix(cap: int) -> np.ndarray:
    """Single-mode annihilator truncated to occupations 0..cap."""
    return np.diag(np.sqrt(np.arange(1, cap + 1, dtype=float)), k=1)


def normal_order_residual(n: int, cap: int = 8) -> float:
    """
    Relative residual of the normal-ordering identity on a truncated ladder.

    Only the block of occupations <= cap - n is compared; there the truncation
    does not affect either side.
    """
    if n > cap:
        raise DomainError(f"Order {n} exceeds ladder cap {cap}.")
    a = ladder_matrix(cap)
    ad = a.T
    lhs = np.linalg.matrix_power(a, n) @ np.linalg.matrix_power(ad, n)
    rhs = np.zeros_like(lhs)
    for k, c in enumerate(normal_order_coeffs(n).coeffs):
        rhs += c * np.linalg.matrix_power(ad, k) @ np.linalg.matrix_power(a, k)
    keep = cap - n + 1
    diff = np.max(np.abs(lhs[:keep, :keep] - rhs[:keep, :keep]))
    return float(diff / max(1.0, np.max(np.abs(lhs[:keep, :keep]))))


# ---------------------------------------------------------------------------
# Discrete de Finetti measures
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MixingMeasure:
    """Finite weighted point set in the unit ball of C^d."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=complex))
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (points.shape[0],):
            raise DomainError("MixingMeasure needs one weight per point.")
        if np.any(weights < 0):
            raise DomainError("MixingMeasure weights must be non-negative.")
        if np.any(np.linalg.norm(points, axis=1) > 1.0 + DEFAULT_TOLERANCES.normalization):
            raise DomainError("MixingMeasure points must lie in the unit ball.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def state(self, N: int) -> DensityOp:
        """Normalized sum_q w_q |u_q^{⊗N}><u_q^{⊗N}|."""
        norms = np.linalg.norm(self.points, axis=1)
        keep = norms > 0
        directions = self.points[keep] / norms[keep, None]
        weights = self.weights[keep] * norms[keep] ** (2 * N)
        if weights.sum() <= 0:
            raise DomainError("MixingMeasure carries no mass on the sphere.")
        psi = product_embed_many(directions, N)
        matrix = (psi.T * (weights / weights.sum())) @ psi.conj()
        return DensityOp(get_sector(self.d, N), 0.5 * (matrix + matrix.conj().T))

    def rdm(self, n: int) -> DensityOp:
        return self.state(n)


def ckmr_mixing(gamma: DensityOp, degree: Optional[int] = None) -> MixingMeasure:
    """
    The CKMR measure of Γ on a sphere quadrature exact up to `degree`.

    With degree >= N + n the n-RDM of the result coincides with ckmr_rdm.
    """
    degree = 2 * gamma.N if degree is None else degree
    quad = sphere_quadrature(gamma.d, degree)
    density = LowerSymbol(gamma).values(quad.points)
    weights = quad.weights * density
    keep = weights > 0
    return MixingMeasure(quad.points[keep], weights[keep])


def upper_symbol_demo(mixing: MixingMeasure, N: int) -> dict:
    """
    Compares a state built from an upper symbol with its own lower symbol at the
    support points. Reported only; the two symbols agree only asymptotically.
    """
    state = mixing.state(N)
    lower = LowerSymbol(state).values(mixing.points)
    upper = mixing.weights / mixing.total_mass()
    return {
        "N": N,
        "points": int(len(upper)),
        "lower_mean": float(np.mean(lower)),
        "correlation": float(np.corrcoef(lower, upper)[0, 1]) if len(upper) > 1 else 1.0,
    }


# Example usage
if __name__ == "__main__":
    from src.states import pure_state

    gamma = pure_state(product_embed(np.array([1.0, 0.0]), 1))
    gap = definetti_gap(gamma, 1)
    logging.info(f"Worked instance: {gap}")
    reconstructor = CKMRReconstructor(ChiribellaFormula())
    print(np.round(reconstructor.reconstruct(gamma, 1).entries.real, 6))
    reconstructor.set_strategy(MomentOracle())
    print(np.round(reconstructor.reconstruct(gamma, 1).entries.real, 6))
