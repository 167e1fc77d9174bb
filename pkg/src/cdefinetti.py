"""
Classical de Finetti on a finite alphabet.

A symmetric probability table over {0..K-1}^N is mixed over the empirical
measures of its configurations (the Diaconis-Freedman construction). Tables
are always built from per-type values so that permutation symmetry holds
bit-for-bit.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import perm
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln

from src.exceptions import CapacityError, DomainError
from src.settings import CLASSICAL_TABLE_CAP, DEFAULT_TOLERANCES
from src.symspace import occupations

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


def _check_table_size(K: int, N: int) -> None:
    if K**N > CLASSICAL_TABLE_CAP:
        logging.error(f"Table K^N = {K}^{N} exceeds cap {CLASSICAL_TABLE_CAP}.")
        raise CapacityError(f"Table K^N = {K}^{N} exceeds cap {CLASSICAL_TABLE_CAP}.")


@lru_cache(maxsize=64)
def configuration_types(K: int, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Type (letter counts) of every configuration in C order.

    Returns:
    Tuple[np.ndarray, np.ndarray]: unique types of shape (T, K) and, for every
    flat configuration, the row of its type.
    """
    _check_table_size(K, N)
    if N == 0:
        types, inverse = np.zeros((1, K), dtype=np.int64), np.zeros(1, dtype=np.int64)
    else:
        configs = np.indices((K,) * N).reshape(N, -1).T
        counts = np.stack([(configs == k).sum(axis=1) for k in range(K)], axis=1)
        types, inverse = np.unique(counts, axis=0, return_inverse=True)
        inverse = inverse.ravel()
    types.setflags(write=False)
    inverse.setflags(write=False)
    return types, inverse


@dataclass(frozen=True)
class SymMeasure:
    """Permutation-symmetric probability table over {0..K-1}^N."""

    K: int
    N: int
    probs: np.ndarray

    def __post_init__(self):
        _check_table_size(self.K, self.N)
        probs = np.asarray(self.probs, dtype=float).reshape((self.K,) * self.N)
        if np.any(probs < 0):
            raise DomainError("Probability table has negative entries.")
        total = float(probs.sum())
        if abs(total - 1.0) > DEFAULT_TOLERANCES.exact_table:
            raise DomainError(f"Probability table sums to {total}.")
        if self.N >= 2:
            rng = np.random.default_rng(0)
            for _ in range(20):
                i, j = rng.choice(self.N, size=2, replace=False)
                if not np.array_equal(probs, np.swapaxes(probs, i, j)):
                    logging.error(f"Table is not symmetric under transposition ({i} {j}).")
                    raise DomainError(f"Table is not symmetric under transposition ({i} {j}).")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_type_values(cls, K: int, N: int, type_values: np.ndarray) -> "SymMeasure":
        """Table whose entry at each configuration is the value of its type."""
        _, inverse = configuration_types(K, N)
        return cls(K, N, np.asarray(type_values, dtype=float)[inverse])

    @classmethod
    def product(cls, rho: np.ndarray, N: int) -> "SymMeasure":
        rho = np.asarray(rho, dtype=float)
        types, _ = configuration_types(rho.shape[0], N)
        values = np.prod(rho[None, :] ** types, axis=1)
        return cls.from_type_values(rho.shape[0], N, values)

    @classmethod
    def point_mass(cls, K: int, N: int, letter: int = 0) -> "SymMeasure":
        probs = np.zeros((K,) * N)
        probs[(letter,) * N] = 1.0
        return cls(K, N, probs)

    def to_json(self) -> dict:
        return {"K": self.K, "N": self.N, "probs": self.probs.ravel().tolist()}

    @classmethod
    def from_json(cls, payload: dict) -> "SymMeasure":
        return cls(int(payload["K"]), int(payload["N"]), np.asarray(payload["probs"], dtype=float))


@dataclass(frozen=True)
class EmpiricalMixing:
    """Weighted empirical measures, one atom per occupied configuration type."""

    weights: np.ndarray
    atoms: np.ndarray
    N: int

    @property
    def K(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def marginal(mu: SymMeasure, n: int) -> SymMeasure:
    """Sum out the last N-n coordinates."""
    if not 0 <= n <= mu.N:
        logging.error(f"Marginal order n={n} outside [0, {mu.N}].")
        raise DomainError(f"Marginal order n={n} outside [0, {mu.N}].")
    axes = tuple(range(n, mu.N))
    return SymMeasure(mu.K, n, mu.probs.sum(axis=axes) if axes else mu.probs)


def df_mixing(mu: SymMeasure) -> EmpiricalMixing:
    """
    Diaconis-Freedman mixing measure of a symmetric table.

    Parameters:
    mu (SymMeasure): Symmetric N-variable table.

    Returns:
    EmpiricalMixing: Empirical measures counts/N weighted by the total mass of
    their type class; zero-weight types are dropped.
    """
    types, inverse = configuration_types(mu.K, mu.N)
    frame = pd.DataFrame({"type": inverse, "mass": mu.probs.ravel()})
    masses = frame.groupby("type", sort=True)["mass"].sum()
    masses = masses[masses > 0]
    atoms = types[masses.index.to_numpy()] / max(mu.N, 1)
    logging.info(f"Diaconis-Freedman mixing: {len(masses)} atoms out of {types.shape[0]} types.")
    return EmpiricalMixing(weights=masses.to_numpy(), atoms=atoms, N=mu.N)


def df_state(mu: SymMeasure) -> SymMeasure:
    """Sum over atoms of weight * (empirical measure)^{⊗N}."""
    mixing = df_mixing(mu)
    types, _ = configuration_types(mu.K, mu.N)
    # value at a type c is sum_atoms w prod_k rho_k^{c_k}
    powers = np.prod(mixing.atoms[:, None, :] ** types[None, :, :], axis=2)
    return SymMeasure.from_type_values(mu.K, mu.N, mixing.weights @ powers)


def tv_distance(a: SymMeasure, b: SymMeasure) -> float:
    """Sum of absolute differences over the table."""
    if (a.K, a.N) != (b.K, b.N):
        raise DomainError(f"Shape mismatch: (K={a.K}, N={a.N}) vs (K={b.K}, N={b.N}).")
    return float(np.abs(a.probs - b.probs).sum())


def falling_ratio(N: int, n: int) -> float:
    """N(N-1)...(N-n+1)/N^n."""
    return perm(N, n) / N**n


def df_residual_measure(mu: SymMeasure, n: int, mixed: SymMeasure = None) -> np.ndarray:
    """ν_n = μ̃^(n) - [N!/((N-n)! N^n)] μ^(n), a non-negative table."""
    mixed = df_state(mu) if mixed is None else mixed
    return marginal(mixed, n).probs - falling_ratio(mu.N, n) * marginal(mu, n).probs


@dataclass
class DFIdentityReport:
    first_residual: float
    second_residual: float
    min_residual_measure: float
    passed: bool
    details: List[dict] = field(default_factory=list)


def df_marginal_identities(mu: SymMeasure, tol: float = DEFAULT_TOLERANCES.exact_table) -> DFIdentityReport:
    """
    Checks the closed-form marginals of the Diaconis-Freedman state.

    μ̃^(1) = μ^(1), μ̃^(2) = ((N-1)/N) μ^(2) + (1/N) diag(μ^(1)), and ν_n >= 0 for n <= N.
    """
    N = mu.N
    if N < 2:
        raise DomainError(f"Marginal identities need N >= 2, got {N}.")
    mixed = df_state(mu)
    mu1 = marginal(mu, 1).probs
    first = float(np.max(np.abs(marginal(mixed, 1).probs - mu1)))
    expected2 = ((N - 1) / N) * marginal(mu, 2).probs + np.diag(mu1) / N
    second = float(np.max(np.abs(marginal(mixed, 2).probs - expected2)))
    details = []
    for n in range(1, N + 1):
        smallest = float(np.min(df_residual_measure(mu, n, mixed)))
        details.append({"n": n, "min_residual_measure": smallest})
    min_nu = min(row["min_residual_measure"] for row in details)
    passed = first < tol and second < tol and min_nu >= -tol
    if not passed:
        logging.warning(f"Diaconis-Freedman identities failed: {first}, {second}, {min_nu}.")
    return DFIdentityReport(first, second, min_nu, passed, details)


def df_bound(n: int, N: int) -> float:
    """2 n (n-1) / N."""
    return 2.0 * n * (n - 1) / N


def df_refined_bound(K: int, n: int, N: int) -> float:
    """(2/N) min(K n, n^2)."""
    return 2.0 * min(K * n, n * n) / N


def df_random_measure(seed: int, K: int, N: int, concentration: float = 1.0) -> SymMeasure:
    """
    Random symmetric table from Dirichlet weights on configuration types.

    Each type class receives a Dirichlet weight which is spread uniformly over
    its multinomial(N; c) configurations.
    """
    types, _ = configuration_types(K, N)
    rng = np.random.default_rng(seed)
    class_weights = rng.dirichlet(np.full(types.shape[0], concentration))
    log_sizes = gammaln(N + 1) - gammaln(types + 1).sum(axis=1)
    return SymMeasure.from_type_values(K, N, class_weights / np.exp(log_sizes))


def type_count(K: int, N: int) -> int:
    """Number of empirical types, binomial(N+K-1, K-1)."""
    return sum(1 for _ in occupations(K, N))


# Example usage
if __name__ == "__main__":
    probs = np.array([[0.0, 0.5], [0.5, 0.0]])
    mu = SymMeasure(2, 2, probs)
    mixed = df_state(mu)
    print(json.dumps(mixed.to_json()))
    print(tv_distance(marginal(mu, 2), marginal(mixed, 2)))
