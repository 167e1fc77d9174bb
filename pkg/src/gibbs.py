"""
Quantum Gibbs states of the mean-field Hamiltonian at temperature T = tN,
classical Gibbs measures exp(-E_H/t) on the one-body sphere, and the two
coherent-state (Berezin-Lieb) inequalities that sandwich one against the other.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import logsumexp, xlogy

from src.exceptions import DomainError, InvariantViolation
from src.hartree import HartreeProblem, fit_inverse_n, hartree_energies
from src.qdefinetti import LowerSymbol, MixingMeasure
from src.settings import DEFAULT_TOLERANCES
from src.sphere import SphereQuadrature, sample_sphere, sphere_quadrature, validate_uniform_modulus
from src.states import DensityOp, random_density, reduce_operator, trace_norm_distance, x_log_x_trace
from src.symspace import get_sector, product_embed_many, sector_dimension

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

# (radial, phase) node counts of the two classical quadrature resolutions per mode count
CLASSICAL_RESOLUTIONS = {2: ((64, 64), (128, 128)), 3: ((16, 16), (24, 24))}


def _check_temperature(T: float) -> None:
    if not T > 0:
        logging.error(f"Temperature must be positive, got {T}.")
        raise DomainError(f"Temperature must be positive, got {T}.")


# ---------------------------------------------------------------------------
# Quantum side
# ---------------------------------------------------------------------------
def quantum_gibbs(p: HartreeProblem, N: int, T: float, lam: Optional[float] = None) -> DensityOp:
    """
    Gibbs state exp(-H_N/T)/Z on SymSector(d, N).

    Parameters:
    p (HartreeProblem): Problem instance.
    N (int): Particle number.
    T (float): Temperature, T > 0.
    lam (Optional[float]): Coupling, defaults to 1/(N-1).

    Returns:
    DensityOp: The Gibbs state, built from the eigendecomposition of H_N.
    """
    _check_temperature(T)
    sector_dimension(p.d, N)
    values, vectors = np.linalg.eigh(p.hamiltonian(N, lam))
    weights = np.exp(-(values - values[0]) / T)
    weights /= weights.sum()
    matrix = (vectors * weights) @ vectors.conj().T
    return DensityOp(get_sector(p.d, N), 0.5 * (matrix + matrix.conj().T))


def quantum_free_energy(p: HartreeProblem, N: int, T: float, lam: Optional[float] = None) -> float:
    """-T log tr exp(-H_N/T), evaluated with a log-sum-exp shift."""
    _check_temperature(T)
    sector_dimension(p.d, N)
    values = np.linalg.eigvalsh(p.hamiltonian(N, lam))
    return float(-T * logsumexp(-values / T))


def free_energy_functional(p: HartreeProblem, gamma: DensityOp, T: float, lam: Optional[float] = None) -> float:
    """F[Γ] = tr H_N Γ + T tr Γ log Γ."""
    _check_temperature(T)
    energy = np.trace(p.hamiltonian(gamma.N, lam) @ gamma.entries).real
    return float(energy + T * x_log_x_trace(gamma.eigenvalues))


def gibbs_optimality_margin(p: HartreeProblem, N: int, T: float, count: int = 50, seed: int = 0) -> float:
    """Smallest F[Γ'] - F[Γ_Gibbs] over random full-rank and low-rank states Γ'."""
    reference = free_energy_functional(p, quantum_gibbs(p, N, T), T)
    sector = get_sector(p.d, N)
    margins = []
    for k in range(count):
        rank = 1 + k % sector.dimension
        margins.append(free_energy_functional(p, random_density(seed + k, sector, rank), T) - reference)
    return float(min(margins))


# ---------------------------------------------------------------------------
# Classical side
# ---------------------------------------------------------------------------
@dataclass
class ClassicalFreeEnergy:
    F_cl: float
    stderr: float
    monte_carlo: float
    quadrature: Optional[float] = None
    quadrature_error: Optional[float] = None


@lru_cache(maxsize=1)
def _uniform_modulus_validated() -> float:
    return validate_uniform_modulus()


def _classical_quadrature_value(p: HartreeProblem, t: float, radial: int, phase: int) -> float:
    quad = sphere_quadrature(p.d, radial_nodes=radial, phase_nodes=phase)
    energies = hartree_energies(quad.points, p)
    return float(-t * logsumexp(-energies / t, b=quad.weights))


def classical_quadrature(p: HartreeProblem, t: float):
    """
    Product-quadrature value of -t log ∫ exp(-E_H/t) du for d <= 3, with the
    difference between two resolutions as error estimate.

    For d = 2 the radial rule integrates over s = |u_1|^2 with unit density,
    relying on |u_1|^2 being uniform on [0, 1]; that fact is checked against
    sampling before first use.
    """
    if p.d not in CLASSICAL_RESOLUTIONS:
        raise DomainError(f"Quadrature path is available for d <= 3, got d={p.d}.")
    if p.d == 2:
        _uniform_modulus_validated()
    coarse, fine = CLASSICAL_RESOLUTIONS[p.d]
    value = _classical_quadrature_value(p, t, *fine)
    error = abs(value - _classical_quadrature_value(p, t, *coarse))
    return value, error


def classical_monte_carlo(p: HartreeProblem, t: float, samples: int, seed: int):
    """Monte Carlo value of F_cl with a delta-method standard error."""
    if samples < DEFAULT_TOLERANCES.min_mc_samples:
        logging.error(f"Refusing Monte Carlo with {samples} < {DEFAULT_TOLERANCES.min_mc_samples} samples.")
        raise DomainError(f"Monte Carlo needs at least {DEFAULT_TOLERANCES.min_mc_samples} samples, got {samples}.")
    rng = np.random.default_rng(seed)
    energies = hartree_energies(sample_sphere(rng, p.d, samples), p)
    shift = energies.min()
    boltzmann = np.exp(-(energies - shift) / t)
    mean = boltzmann.mean()
    stderr = t * boltzmann.std(ddof=1) / (np.sqrt(samples) * mean)
    return float(shift - t * np.log(mean)), float(stderr)


def classical_free_energy(
    p: HartreeProblem,
    t: float,
    samples: int = 100_000,
    seed: int = 0,
    quadrature: Optional[bool] = None,
) -> ClassicalFreeEnergy:
    """
    F_cl = -t log ∫ exp(-E_H[u]/t) du over the normalized sphere measure.

    Parameters:
    p (HartreeProblem): Problem instance.
    t (float): Classical temperature, t > 0.
    samples (int): Monte Carlo sample count, at least 10^3.
    seed (int): Seed of the sampling stream.
    quadrature (Optional[bool]): Also run the quadrature path; defaults to d <= 3.

    Returns:
    ClassicalFreeEnergy: Both paths when available. F_cl is the quadrature
    value when it exists, the Monte Carlo value otherwise.
    """
    _check_temperature(t)
    mc_value, stderr = classical_monte_carlo(p, t, samples, seed)
    use_quadrature = p.d in CLASSICAL_RESOLUTIONS if quadrature is None else quadrature
    if not use_quadrature:
        return ClassicalFreeEnergy(F_cl=mc_value, stderr=stderr, monte_carlo=mc_value)
    value, error = classical_quadrature(p, t)
    if abs(value - mc_value) > DEFAULT_TOLERANCES.mc_sigmas * stderr + error:
        logging.warning(f"Monte Carlo F_cl={mc_value} is more than 4 sigma from quadrature {value}.")
    return ClassicalFreeEnergy(F_cl=value, stderr=stderr, monte_carlo=mc_value, quadrature=value, quadrature_error=error)


# ---------------------------------------------------------------------------
# Symbols and Berezin-Lieb inequalities
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class UpperSymbol:
    """
    A non-negative density ν on a sphere quadrature with ∫ ν du = 1. It
    generates the states ∫ ν(u) |u^{⊗N}><u^{⊗N}| du.
    """

    quadrature: SphereQuadrature
    density: np.ndarray

    def __post_init__(self):
        density = np.asarray(self.density, dtype=float)
        if density.shape != (len(self.quadrature),):
            raise DomainError("Upper symbol needs one density value per quadrature point.")
        if np.any(density < 0):
            raise DomainError("Upper symbol density must be non-negative.")
        mass = float(self.quadrature.integrate(density))
        if abs(mass - 1.0) > DEFAULT_TOLERANCES.trace:
            raise DomainError(f"Upper symbol density integrates to {mass}.")
        object.__setattr__(self, "density", density)

    def mixing(self) -> MixingMeasure:
        return MixingMeasure(self.quadrature.points, self.quadrature.weights * self.density)

    def state(self, N: int) -> DensityOp:
        return self.mixing().state(N)

    def resolution_residual(self, N: int) -> float:
        """Max-entry deviation of dim Σ_q W_q |u_q^N><u_q^N| from the identity."""
        psi = product_embed_many(self.quadrature.points, N)
        dim = psi.shape[1]
        resolution = dim * (psi.T * self.quadrature.weights) @ psi.conj()
        return float(np.max(np.abs(resolution - np.eye(dim))))

    def entropy_integral(self, dim: int) -> float:
        """∫ ν log(ν/dim) du, exact on the quadrature."""
        return float(self.quadrature.integrate(xlogy(self.density, self.density / dim)))


def classical_gibbs_symbol(p: HartreeProblem, t: float, degree: int) -> UpperSymbol:
    """Density of the classical Gibbs measure exp(-E_H/t)/Z on a quadrature exact to `degree`."""
    _check_temperature(t)
    quad = sphere_quadrature(p.d, degree)
    energies = hartree_energies(quad.points, p)
    log_boltzmann = -energies / t
    density = np.exp(log_boltzmann - logsumexp(log_boltzmann, b=quad.weights))
    return UpperSymbol(quad, density)


def classical_gibbs_rdm(p: HartreeProblem, t: float, n: int = 1, degree: Optional[int] = None) -> DensityOp:
    """∫ |u^{⊗n}><u^{⊗n}| dμ_cl(u) on a quadrature."""
    degree = 2 * n + (40 if p.d == 2 else 12) if degree is None else degree
    return classical_gibbs_symbol(p, t, degree).state(n)


def _lower_symbol_entropy(gamma: DensityOp, radial: int, phase: int) -> float:
    quad = sphere_quadrature(gamma.d, radial_nodes=radial, phase_nodes=phase)
    mu = LowerSymbol(gamma).values(quad.points)
    return float(quad.integrate(xlogy(mu, mu / gamma.sector.dimension)))


def lower_symbol_entropy(gamma: DensityOp, samples: int = 200_000, seed: int = 0):
    """
    ∫ μ log(μ/dim) du for the lower symbol μ of Γ, with an error estimate.

    Quadrature at two resolutions for d <= 3, Monte Carlo with a 4 sigma
    certificate above that.
    """
    N = gamma.N
    if gamma.d == 2:
        coarse, fine = (2 * N + 16, 4 * N + 16), (4 * N + 32, 8 * N + 32)
    elif gamma.d == 3:
        coarse, fine = (N + 8, 2 * N + 8), (N + 12, 2 * N + 12)
    else:
        rng = np.random.default_rng(seed)
        mu = LowerSymbol(gamma).values(sample_sphere(rng, gamma.d, samples))
        values = xlogy(mu, mu / gamma.sector.dimension)
        return float(values.mean()), float(DEFAULT_TOLERANCES.mc_sigmas * values.std(ddof=1) / np.sqrt(samples))
    value = _lower_symbol_entropy(gamma, *fine)
    return value, abs(value - _lower_symbol_entropy(gamma, *coarse))


@dataclass
class BerezinLiebReport:
    lhs: float
    rhs: float
    slack: float
    error: float
    passed: bool
    upper_rhs: Optional[float] = None
    upper_slack: Optional[float] = None
    upper_passed: Optional[bool] = None


def berezin_lieb_check(
    gamma: DensityOp,
    upper: Optional[UpperSymbol] = None,
    second: bool = False,
    strict: bool = False,
) -> BerezinLiebReport:
    """
    Coherent-state inequalities for f(x) = x log x.

    First inequality: tr Γ log Γ >= ∫ μ log(μ/dim) du with μ the lower symbol.
    Second inequality, for states generated by an upper symbol ν:
    tr Γ log Γ <= ∫ ν log(ν/dim) du.

    Parameters:
    gamma (DensityOp): State on SymSector(d, N).
    upper (Optional[UpperSymbol]): Generating symbol of gamma.
    second (bool): Also check the second inequality; requires `upper`.
    strict (bool): Raise InvariantViolation on a failed inequality.

    Returns:
    BerezinLiebReport: lhs, rhs, slack = lhs - rhs and the quadrature error,
    plus the second-inequality fields when requested.
    """
    if second and upper is None:
        logging.error("Second Berezin-Lieb inequality requested without an upper symbol.")
        raise DomainError("The second inequality needs the generating upper symbol of the state.")
    lhs = x_log_x_trace(gamma.eigenvalues)
    rhs, error = lower_symbol_entropy(gamma)
    slack = lhs - rhs
    passed = slack >= -(error + 1e-8)
    report = BerezinLiebReport(lhs=lhs, rhs=rhs, slack=slack, error=error, passed=passed)

    if second:
        if trace_norm_distance(gamma, upper.state(gamma.N)) > 1e-8:
            raise DomainError("The state is not generated by the given upper symbol.")
        residual = upper.resolution_residual(gamma.N)
        if residual > 1e-10:
            raise DomainError(f"Upper-symbol quadrature does not resolve the identity (residual {residual}).")
        upper_rhs = upper.entropy_integral(gamma.sector.dimension)
        report.upper_rhs = upper_rhs
        report.upper_slack = upper_rhs - lhs
        report.upper_passed = report.upper_slack >= -DEFAULT_TOLERANCES.bound_slack

    if abs(slack) < 1e-8:
        logging.info(f"First Berezin-Lieb inequality is an equality within 1e-8 (N={gamma.N}).")
    if not report.passed or report.upper_passed is False:
        logging.warning(f"Berezin-Lieb check failed: {report}.")
        if strict:
            raise InvariantViolation(f"Berezin-Lieb check failed: {report}.")
    return report


# ---------------------------------------------------------------------------
# Mean-field bounds
# ---------------------------------------------------------------------------
def shifted_free_energy(p: HartreeProblem, N: int, t: float) -> float:
    """(F_N + T log dim)/N at T = tN."""
    T = t * N
    return (quantum_free_energy(p, N, T) + T * np.log(sector_dimension(p.d, N))) / N


def trial_state_upper_bound(p: HartreeProblem, N: int, t: float) -> dict:
    """
    Upper bound from the trial state ∫ |u^N><u^N| dμ_cl.

    On a quadrature exact to degree 2N every step is an identity or the
    second coherent-state inequality, so shifted <= F_cl(quadrature) holds up
    to rounding.
    """
    symbol = classical_gibbs_symbol(p, t, 2 * N)
    quad = symbol.quadrature
    energies = hartree_energies(quad.points, p)
    F_quad = float(-t * logsumexp(-energies / t, b=quad.weights))
    trial = symbol.state(N)
    T = t * N
    dim = trial.sector.dimension
    trial_shifted = (free_energy_functional(p, trial, T) + T * np.log(dim)) / N
    shifted = shifted_free_energy(p, N, t)
    return {
        "N": N,
        "shifted": shifted,
        "trial_shifted": trial_shifted,
        "F_cl_quadrature": F_quad,
        "slack": F_quad - shifted,
        "passed": shifted <= trial_shifted + 1e-10 and trial_shifted <= F_quad + 1e-10,
    }


def lower_bound_chain(p: HartreeProblem, N: int, t: float, F_cl: float) -> dict:
    """
    Lower bound via the lower symbol μ of the Gibbs state:
    shifted >= ∫ μ E_H du + t ∫ μ log μ du + ΔE >= F_cl + ΔE,
    with ΔE = tr(H_N Γ)/N - ∫ μ E_H du the de Finetti energy error.
    """
    T = t * N
    gamma = quantum_gibbs(p, N, T)
    quad = sphere_quadrature(p.d, N + 2)
    mu = LowerSymbol(gamma).values(quad.points)
    symbol_energy = float(quad.integrate(mu * hartree_energies(quad.points, p)))
    energy_per_particle = float(np.trace(p.hamiltonian(N) @ gamma.entries).real) / N
    delta_E = energy_per_particle - symbol_energy
    shifted = shifted_free_energy(p, N, t)
    bound = F_cl + delta_E
    return {"N": N, "shifted": shifted, "lower_bound": bound, "deltaE_times_N": delta_E * N, "slack": shifted - bound}


@dataclass
class GapSweepResult:
    rows: pd.DataFrame
    tail_max_gap: float
    fit_C: float
    fit_residual: float
    rdm_distances: List[float]
    violations: int


def gap_sweep(
    p: HartreeProblem,
    t: float,
    N_list: Sequence[int],
    samples: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    strict: bool = False,
) -> GapSweepResult:
    """
    Shifted quantum free energy against F_cl over particle numbers.

    Parameters:
    p (HartreeProblem): Problem instance.
    t (float): Classical temperature; T = tN per row.
    N_list (Sequence[int]): Particle numbers.
    samples (int): Monte Carlo samples per row.
    seed (int): Base seed; row N draws from the stream (seed, N).
    threads (int): Worker threads over N.
    strict (bool): Raise InvariantViolation when violations are found.

    Returns:
    GapSweepResult: Rows N,T,F_N,shifted,F_cl,mc_err,gap with gap = F_cl - shifted,
    the largest |gap| over the top half of N, the C in |gap| ≈ C d/N, 1-RDM
    distances to the classical Gibbs 1-RDM, and the violation count.
    """
    _check_temperature(t)
    N_sorted = sorted(set(int(N) for N in N_list))
    for N in N_sorted:
        sector_dimension(p.d, N)
    quad_value = classical_quadrature(p, t) if p.d in CLASSICAL_RESOLUTIONS else None
    classical_rdm = classical_gibbs_rdm(p, t, 1) if p.d in CLASSICAL_RESOLUTIONS else None

    def row(N: int) -> dict:
        T = t * N
        F_N = quantum_free_energy(p, N, T)
        shifted = (F_N + T * np.log(sector_dimension(p.d, N))) / N
        mc_value, stderr = classical_monte_carlo(p, t, samples, [seed, N])
        F_cl = quad_value[0] if quad_value is not None else mc_value
        distance = None
        if classical_rdm is not None:
            gamma1 = reduce_operator(quantum_gibbs(p, N, T).entries, p.d, N, 1)
            distance = trace_norm_distance(gamma1, classical_rdm)
        return {"N": N, "T": T, "F_N": F_N, "shifted": shifted, "F_cl": F_cl, "mc_err": stderr, "gap": F_cl - shifted, "rdm": distance}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(row, N_sorted))
    frame = pd.DataFrame.from_records(records)
    rdm_distances = [] if classical_rdm is None else frame["rdm"].tolist()
    frame = frame[["N", "T", "F_N", "shifted", "F_cl", "mc_err", "gap"]]

    if quad_value is not None:
        error = np.full(len(frame), quad_value[1] + 1e-10)
    else:
        error = DEFAULT_TOLERANCES.mc_sigmas * frame["mc_err"].to_numpy()
    upper = int((frame["gap"].to_numpy() < -error).sum())
    magnitudes = frame["gap"].abs().to_numpy()
    growth = int((np.diff(magnitudes) > error[1:] + error[:-1]).sum())
    violations = upper + growth

    top = frame.iloc[len(frame) // 2 :]
    tail_max = float(top["gap"].abs().max()) if len(top) else 0.0
    fit_C, fit_residual = fit_inverse_n(frame["N"], frame["gap"].abs(), scale=p.d)
    logging.info(f"Gibbs sweep t={t}: max tail gap {tail_max:.3e}, C={fit_C:.4g}, violations={violations}.")
    if strict and violations:
        raise InvariantViolation(f"Gibbs sweep found {violations} violations.")
    return GapSweepResult(frame, tail_max, fit_C, fit_residual, rdm_distances, violations)


# Example usage
if __name__ == "__main__":
    from src.hartree import free_problem

    problem = free_problem(2)
    result = gap_sweep(problem, 1.0, [4, 8, 16, 32, 40])
    print(result.rows.to_string(index=False))
    print(f"closed form {-np.log(1 - np.exp(-1)):.6f}")
