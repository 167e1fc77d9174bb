"""
Integration over the complex unit sphere of C^d against the normalized uniform measure.

Three routes are provided and cross-checked against each other:

* closed-form monomial moments, E[prod |u_i|^{2k_i}] = (d-1)! prod k_i! / (d-1+|k|)!;
* Monte Carlo from normalized complex Gaussian draws;
* a tensor-product quadrature that is exact for phase-invariant polynomials of a
  requested degree (Gauss-Legendre in collapsed simplex coordinates for the
  moduli, trapezoid rules for the relative phases, u_1 taken real).

The closed form is only trusted after validate_sphere_moments has compared it
with sampling for the mode count in use.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import factorial
from typing import List, Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

from src.exceptions import DomainError, InvariantViolation
from src.settings import DEFAULT_TOLERANCES

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

VALIDATION_SEED = 20_240_601


def log_sphere_moment(d: int, k: np.ndarray) -> np.ndarray:
    """log E[prod_i |u_i|^{2 k_i}] for exponent rows k of shape (..., d)."""
    k = np.asarray(k)
    return gammaln(d) + gammaln(k + 1).sum(axis=-1) - gammaln(d + k.sum(axis=-1))


def sphere_moment(d: int, k) -> float:
    """E[prod_i |u_i|^{2 k_i}] over the uniform measure on the unit sphere of C^d."""
    k = np.asarray(k)
    if k.shape != (d,) or np.any(k < 0):
        raise DomainError(f"Exponent vector {k.tolist()} does not match d={d}.")
    return float(np.exp(log_sphere_moment(d, k)))


def sample_sphere(rng: np.random.Generator, d: int, size: int) -> np.ndarray:
    """Uniform points on the unit sphere of C^d from normalized complex Gaussians."""
    z = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Moment validation
# ---------------------------------------------------------------------------
@dataclass
class MomentValidation:
    d: int
    samples: int
    max_sigma: float
    passed: bool
    rows: List[dict] = field(default_factory=list)


def validate_sphere_moments(
    d: int,
    samples: int = DEFAULT_TOLERANCES.moment_validation_samples,
    seed: int = VALIDATION_SEED,
    max_order: int = 3,
    sigmas: float = DEFAULT_TOLERANCES.mc_sigmas,
) -> MomentValidation:
    """
    Compares the closed-form moments with Monte Carlo sphere sampling.

    Every exponent vector with total order <= max_order is tested, together
    with one mixed monomial u_1 conj(u_2) whose average must vanish.

    Parameters:
    d (int): Mode count.
    samples (int): Number of sphere samples.
    seed (int): Seed of the sampling stream.
    max_order (int): Largest total exponent tested.
    sigmas (float): Allowed deviation in standard errors.

    Returns:
    MomentValidation: Per-monomial deviations and the overall verdict.
    """
    rng = np.random.default_rng(seed)
    points = sample_sphere(rng, d, samples)
    moduli = np.abs(points) ** 2
    rows = []
    for k in product(range(max_order + 1), repeat=d):
        if sum(k) == 0 or sum(k) > max_order:
            continue
        values = np.prod(moduli ** np.asarray(k)[None, :], axis=1)
        estimate = values.mean()
        stderr = values.std(ddof=1) / np.sqrt(samples)
        exact = sphere_moment(d, k)
        rows.append(
            {"exponents": list(k), "exact": exact, "estimate": float(estimate), "sigma": abs(estimate - exact) / stderr}
        )
    if d >= 2:
        mixed = points[:, 0] * points[:, 1].conj()
        for part in (mixed.real, mixed.imag):
            stderr = part.std(ddof=1) / np.sqrt(samples)
            rows.append({"exponents": "u1*conj(u2)", "exact": 0.0, "estimate": float(part.mean()), "sigma": abs(part.mean()) / stderr})
    max_sigma = max(row["sigma"] for row in rows)
    passed = bool(max_sigma <= sigmas)
    logging.info(f"Sphere moment validation d={d}: {len(rows)} monomials, max deviation {max_sigma:.2f} sigma.")
    return MomentValidation(d=d, samples=samples, max_sigma=float(max_sigma), passed=passed, rows=rows)


@lru_cache(maxsize=None)
def ensure_moments_validated(d: int) -> MomentValidation:
    """Runs the Monte Carlo gate once per mode count and raises if it fails."""
    report = validate_sphere_moments(d)
    if not report.passed:
        logging.error(f"Closed-form sphere moments disagree with sampling for d={d}.")
        raise InvariantViolation(
            f"Closed-form sphere moments disagree with sampling for d={d} ({report.max_sigma:.2f} sigma)."
        )
    return report


def validate_uniform_modulus(samples: int = 200_000, seed: int = VALIDATION_SEED, alpha: float = 1e-3) -> float:
    """
    Kolmogorov-Smirnov check that |u_1|^2 is uniform on [0, 1] for d = 2.

    Returns:
    float: The test p-value; raises InvariantViolation below alpha.
    """
    rng = np.random.default_rng(seed)
    modulus = np.abs(sample_sphere(rng, 2, samples)[:, 0]) ** 2
    pvalue = float(stats.kstest(modulus, "uniform").pvalue)
    logging.info(f"Uniform |u_1|^2 check for d=2: KS p-value {pvalue:.4f}.")
    if pvalue < alpha:
        raise InvariantViolation(f"|u_1|^2 is not uniform for d=2 (KS p-value {pvalue}).")
    return pvalue


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SphereQuadrature:
    """Weighted point set on the unit sphere of C^d with weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Weighted sum over the leading axis of values."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def sphere_quadrature(
    d: int,
    degree: int = 0,
    radial_nodes: Optional[int] = None,
    phase_nodes: Optional[int] = None,
) -> SphereQuadrature:
    """
    Product quadrature on the unit sphere of C^d.

    With default node counts the rule integrates exactly every polynomial in
    (u, conj(u)) that is invariant under a global phase and has degree at
    most `degree` in u.

    Parameters:
    d (int): Mode count.
    degree (int): Polynomial degree in u to integrate exactly.
    radial_nodes (Optional[int]): Gauss-Legendre nodes per simplex coordinate.
    phase_nodes (Optional[int]): Trapezoid nodes per relative phase.

    Returns:
    SphereQuadrature: Points and normalized weights.
    """
    if d < 1:
        raise DomainError(f"Sphere quadrature needs d >= 1, got {d}.")
    if d == 1:
        return SphereQuadrature(np.ones((1, 1), dtype=complex), np.ones(1))

    m = radial_nodes if radial_nodes is not None else (degree + d) // 2 + 1
    P = phase_nodes if phase_nodes is not None else degree + 1

    nodes, node_weights = np.polynomial.legendre.leggauss(m)
    x_nodes = 0.5 * (nodes + 1.0)
    x_weights = 0.5 * node_weights

    # collapsed coordinates x_1..x_{d-1} -> moduli s_1..s_d on the simplex
    grids = np.meshgrid(*([x_nodes] * (d - 1)), indexing="ij")
    weight_grids = np.meshgrid(*([x_weights] * (d - 1)), indexing="ij")
    xs = np.stack([g.ravel() for g in grids], axis=1)
    radial_weight = np.prod(np.stack([g.ravel() for g in weight_grids], axis=1), axis=1)

    moduli = np.empty((xs.shape[0], d))
    remaining = np.ones(xs.shape[0])
    for j in range(d - 1):
        moduli[:, j] = remaining * xs[:, j]
        remaining = remaining * (1.0 - xs[:, j])
    moduli[:, d - 1] = remaining

    jacobian = float(factorial(d - 1)) * np.ones(xs.shape[0])
    for j in range(d - 2):
        jacobian *= (1.0 - xs[:, j]) ** (d - 2 - j)
    radial_weight = radial_weight * jacobian

    phases = 2.0 * np.pi * np.arange(P) / P
    phase_grid = np.stack([g.ravel() for g in np.meshgrid(*([phases] * (d - 1)), indexing="ij")], axis=1)

    amplitudes = np.sqrt(np.clip(moduli, 0.0, None))
    phase_factors = np.ones((phase_grid.shape[0], d), dtype=complex)
    phase_factors[:, 1:] = np.exp(1j * phase_grid)

    points = (amplitudes[:, None, :] * phase_factors[None, :, :]).reshape(-1, d)
    weights = (radial_weight[:, None] * np.full(phase_grid.shape[0], 1.0 / phase_grid.shape[0])[None, :]).ravel()
    weights = weights / weights.sum()
    return SphereQuadrature(points, weights)


def sphere_average(fn, d: int, degree: int) -> float:
    """Exact average of a phase-invariant polynomial function of u of the given degree."""
    quad = sphere_quadrature(d, degree)
    return float(quad.integrate(np.asarray([fn(u) for u in quad.points])))


# Example usage
if __name__ == "__main__":
    report = validate_sphere_moments(3, samples=200_000)
    print(f"passed={report.passed} max_sigma={report.max_sigma:.2f}")
    quad = sphere_quadrature(3, degree=4)
    print(quad.integrate(np.abs(quad.points[:, 0]) ** 4), sphere_moment(3, [2, 0, 0]))
