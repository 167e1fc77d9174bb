import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy.optimize import nnls

from src.exceptions import DomainError, InvariantViolation
from src.settings import DEFAULT_TOLERANCES
from src.sphere import sample_sphere
from src.states import reduce_operator, trace_norm_distance
from src.symspace import (
    OneBodyOp,
    TwoBodyOp,
    _check_normalized,
    assemble_hamiltonian,
    product_embed,
    product_embed_many,
    random_problem_operators,
    sector_dimension,
)

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


@dataclass(frozen=True)
class HartreeProblem:
    """One-body operator h and two-body operator w on C^d."""

    h: OneBodyOp
    w: TwoBodyOp

    def __post_init__(self):
        if self.h.d != self.w.d:
            raise DomainError(f"h has d={self.h.d} but w has d={self.w.d}.")

    @property
    def d(self) -> int:
        return self.h.d

    def hamiltonian(self, N: int, lam: Optional[float] = None) -> np.ndarray:
        return assemble_hamiltonian(self.h, self.w, N, lam)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "h": {"re": self.h.entries.real.tolist(), "im": self.h.entries.imag.tolist()},
            "w": {"re": self.w.entries.real.tolist(), "im": self.w.entries.imag.tolist()},
        }

    @classmethod
    def from_json(cls, payload: dict) -> "HartreeProblem":
        d = int(payload["d"])
        h = np.asarray(payload["h"]["re"], dtype=float) + 1j * np.asarray(payload["h"]["im"], dtype=float)
        w = np.asarray(payload["w"]["re"], dtype=float) + 1j * np.asarray(payload["w"]["im"], dtype=float)
        return cls(OneBodyOp(h), TwoBodyOp(d, w))


def diagonal_problem(g: float = 2.0) -> HartreeProblem:
    """h = diag(0, 1), w = g |e_1⊗e_1><e_1⊗e_1|."""
    w_full = np.zeros((4, 4))
    w_full[0, 0] = g
    return HartreeProblem(OneBodyOp(np.diag([0.0, 1.0])), TwoBodyOp.from_tensor(2, w_full))


def free_problem(d: int) -> HartreeProblem:
    """h = diag(0, 1, ..., d-1), no interaction."""
    return HartreeProblem(OneBodyOp(np.diag(np.arange(d, dtype=float))), TwoBodyOp.zero(d))


def random_problem(seed: int, d: int) -> HartreeProblem:
    h, w = random_problem_operators(seed, d)
    return HartreeProblem(h, w)


# ---------------------------------------------------------------------------
# Functional and gradients
# ---------------------------------------------------------------------------
def hartree_energy(u: np.ndarray, p: HartreeProblem, tol: float = DEFAULT_TOLERANCES.normalization) -> float:
    """
    E_H[u] = <u, h u> + 1/2 <u⊗u, w u⊗u>.

    Parameters:
    u (np.ndarray): Normalized d-vector.
    p (HartreeProblem): Problem instance.
    tol (float): Normalization tolerance.

    Returns:
    float: Hartree energy.
    """
    u = _check_normalized(u, tol)
    pair = product_embed(u, 2, tol=tol).amplitudes
    return float(np.vdot(u, p.h.entries @ u).real + 0.5 * np.vdot(pair, p.w.entries @ pair).real)


def hartree_energies(points: np.ndarray, p: HartreeProblem) -> np.ndarray:
    """E_H at every row of points (unit vectors), without per-row normalization checks."""
    points = np.asarray(points, dtype=complex)
    pairs = product_embed_many(points, 2)
    one_body = np.einsum("qi,ij,qj->q", points.conj(), p.h.entries, points).real
    two_body = np.einsum("qa,ab,qb->q", pairs.conj(), p.w.entries, pairs).real
    return one_body + 0.5 * two_body


def euclidean_gradient(u: np.ndarray, p: HartreeProblem) -> np.ndarray:
    """Real gradient 2(h u + T conj(u)) with T = reshape(w (u⊗u))."""
    u = np.asarray(u, dtype=complex)
    d = p.d
    T = (p.w.tensor() @ np.kron(u, u)).reshape(d, d)
    return 2.0 * (p.h.entries @ u + T @ u.conj())


def riemannian_gradient(u: np.ndarray, p: HartreeProblem) -> np.ndarray:
    G = euclidean_gradient(u, p)
    return G - np.vdot(u, G).real * u


def _retract(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def finite_difference_gradient(u: np.ndarray, p: HartreeProblem, eps: float = 1e-6) -> np.ndarray:
    """Central differences of E_H composed with normalization, along e_k and i e_k."""
    u = np.asarray(u, dtype=complex)
    grad = np.zeros(p.d, dtype=complex)
    for k in range(p.d):
        for unit in (1.0, 1j):
            xi = np.zeros(p.d, dtype=complex)
            xi[k] = unit
            forward = hartree_energy(_retract(u + eps * xi), p)
            backward = hartree_energy(_retract(u - eps * xi), p)
            derivative = (forward - backward) / (2 * eps)
            grad[k] += derivative if unit == 1.0 else 1j * derivative
    return grad


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------
@dataclass
class DescentRun:
    value: float
    u: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool


@dataclass
class HartreeResult:
    e_H: float
    u: np.ndarray
    trace: List[int]
    converged: bool
    minimizers: List[np.ndarray] = field(default_factory=list)


def start_frame(d: int, restarts: int = 16, seed: int = 0) -> np.ndarray:
    """
    Deterministic multistart frame: basis vectors, (e_i+e_j)/√2, (e_i+i e_j)/√2,
    then seeded Gaussian directions.
    """
    starts = [np.eye(d, dtype=complex)[i] for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            for phase in (1.0, 1j):
                v = np.zeros(d, dtype=complex)
                v[i], v[j] = 1.0, phase
                starts.append(v / np.sqrt(2))
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(sample_sphere(rng, d, 1)[0])
    return np.array(starts[:restarts])


def projected_descent(
    u0: np.ndarray,
    p: HartreeProblem,
    max_iter: int = 5000,
    grad_tol: float = DEFAULT_TOLERANCES.grad_tol,
    armijo: float = 1e-4,
) -> DescentRun:
    """Projected gradient on the sphere with Armijo backtracking and a growing trial step."""
    u = _retract(np.asarray(u0, dtype=complex))
    value = hartree_energy(u, p)
    step = 1.0
    for iteration in range(max_iter):
        g = riemannian_gradient(u, p)
        g_norm = float(np.linalg.norm(g))
        if g_norm < grad_tol:
            return DescentRun(value, u, iteration, g_norm, True)
        step = min(2.0 * step, 10.0)
        while True:
            candidate = _retract(u - step * g)
            candidate_value = hartree_energy(candidate, p)
            if candidate_value <= value - armijo * step * g_norm**2 or step < 1e-14:
                break
            step *= 0.5
        if step < 1e-14:
            # no further decrease possible at double precision
            return DescentRun(value, u, iteration, g_norm, g_norm < 1e3 * grad_tol)
        u, value = candidate, candidate_value
    g_norm = float(np.linalg.norm(riemannian_gradient(u, p)))
    return DescentRun(value, u, max_iter, g_norm, g_norm < grad_tol)


def hartree_minimize(
    p: HartreeProblem,
    restarts: int = 16,
    max_iter: int = 5000,
    grad_tol: float = DEFAULT_TOLERANCES.grad_tol,
    seed: int = 0,
    threads: int = 1,
    minimizer_tol: float = 1e-7,
) -> HartreeResult:
    """
    Multistart projected-gradient minimization of the Hartree functional.

    Parameters:
    p (HartreeProblem): Problem instance.
    restarts (int): Number of starts from the deterministic frame.
    max_iter (int): Iteration cap per start.
    grad_tol (float): Riemannian gradient norm for convergence.
    seed (int): Seed of the Gaussian part of the frame.
    threads (int): Worker threads for the restarts.
    minimizer_tol (float): Energy window defining the set of found minimizers.

    Returns:
    HartreeResult: Best value, its minimizer, iteration counts per start, the
    convergence flag and every start that ended within minimizer_tol of the best.
    """
    starts = start_frame(p.d, restarts, seed)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        runs = list(executor.map(lambda u0: projected_descent(u0, p, max_iter, grad_tol), starts))
    converged_runs = [run for run in runs if run.converged]
    pool = converged_runs if converged_runs else runs
    best = min(pool, key=lambda run: run.value)
    if not converged_runs:
        logging.warning(f"Hartree minimization did not converge; best value {best.value} is flagged.")
    minimizers = [run.u for run in runs if run.value <= best.value + minimizer_tol]
    logging.info(f"Hartree minimum e_H={best.value:.12f} from {len(runs)} starts ({len(minimizers)} at the minimum).")
    return HartreeResult(
        e_H=best.value,
        u=best.u,
        trace=[run.iterations for run in runs],
        converged=bool(converged_runs),
        minimizers=minimizers,
    )


def probe_minimum(p: HartreeProblem, count: int = 10_000, seed: int = 1) -> float:
    """Smallest Hartree energy over random sphere probes."""
    rng = np.random.default_rng(seed)
    return float(hartree_energies(sample_sphere(rng, p.d, count), p).min())


# ---------------------------------------------------------------------------
# N-body side
# ---------------------------------------------------------------------------
def ground_energy(p: HartreeProblem, N: int, lam: Optional[float] = None) -> float:
    """Smallest eigenvalue of the mean-field Hamiltonian on SymSector(d, N)."""
    sector_dimension(p.d, N)
    return float(np.linalg.eigvalsh(p.hamiltonian(N, lam))[0])


def ground_state_rdm1(p: HartreeProblem, N: int, lam: Optional[float] = None, degeneracy_tol: float = 1e-9) -> np.ndarray:
    """One-body density matrix of the uniform mixture over the ground eigenspace."""
    values, vectors = np.linalg.eigh(p.hamiltonian(N, lam))
    ground = vectors[:, values <= values[0] + degeneracy_tol]
    state = ground @ ground.conj().T / ground.shape[1]
    return reduce_operator(state, p.d, N, 1)


def phase_orbit(u: np.ndarray, grid: int = 8) -> np.ndarray:
    """Relative-phase rotations of u on a grid; they preserve E_H when E_H is phase-blind per mode."""
    d = u.shape[0]
    angles = 2 * np.pi * np.arange(grid) / grid
    orbit = []
    for combo in product(angles, repeat=d - 1):
        phases = np.exp(1j * np.concatenate([[0.0], combo]))
        orbit.append(phases * u)
    return np.array(orbit)


def minimizer_hull_distance(gamma1: np.ndarray, minimizers: Sequence[np.ndarray], p: HartreeProblem, grid: int = 8) -> float:
    """
    Trace distance from gamma1 to the convex hull of |v><v| over found minimizers,
    enlarged by relative-phase rotations that leave the Hartree energy unchanged.
    """
    reference = min(hartree_energy(u, p) for u in minimizers)
    candidates = []
    for u in minimizers:
        for v in phase_orbit(u, grid):
            if abs(hartree_energy(v, p) - reference) <= 1e-8:
                candidates.append(v)
    projectors = np.array([np.outer(v, v.conj()) for v in candidates])
    design = np.concatenate([projectors.real.reshape(len(candidates), -1), projectors.imag.reshape(len(candidates), -1)], axis=1).T
    target = np.concatenate([gamma1.real.ravel(), gamma1.imag.ravel()])
    # heavy row pins the weights to sum one
    design = np.vstack([design, 1e3 * np.ones(len(candidates))])
    target = np.concatenate([target, [1e3]])
    weights, _ = nnls(design, target)
    weights = weights / weights.sum()
    hull_point = np.tensordot(weights, projectors, axes=(0, 0))
    return trace_norm_distance(gamma1, hull_point)


# ---------------------------------------------------------------------------
# Convergence sweep
# ---------------------------------------------------------------------------
@dataclass
class SweepResult:
    rows: pd.DataFrame
    e_H: float
    fit_C: float
    fit_residual: float
    upper_bound_violations: int
    monotonicity_violations: int
    gapN_ratio: float

    @property
    def violations(self) -> int:
        return self.upper_bound_violations + self.monotonicity_violations


def fit_inverse_n(N_values: np.ndarray, gaps: np.ndarray, scale: float = 1.0):
    """Least-squares fit gap ≈ C * scale / N without intercept; returns (C, rms residual)."""
    X = scale / np.asarray(N_values, dtype=float)
    y = np.asarray(gaps, dtype=float)
    if np.allclose(y, 0.0):
        return 0.0, 0.0
    model = sm.OLS(y, X).fit()
    return float(model.params[0]), float(np.sqrt(np.mean(model.resid**2)))


def convergence_sweep(
    p: HartreeProblem,
    N_list: Sequence[int],
    threads: int = 1,
    strict: bool = True,
    minimize_options: Optional[dict] = None,
) -> SweepResult:
    """
    Exact E(N)/N against the Hartree minimum over a list of particle numbers.

    Parameters:
    p (HartreeProblem): Problem instance.
    N_list (Sequence[int]): Particle numbers, each >= 2.
    threads (int): Worker threads over N.
    strict (bool): Raise InvariantViolation on an upper-bound or monotonicity failure.
    minimize_options (Optional[dict]): Keyword arguments for hartree_minimize.

    Returns:
    SweepResult: Rows N,E,EperN,eH,gap,fitC,fitResidual plus the 1-RDM hull distance.
    """
    N_sorted = sorted(set(int(N) for N in N_list))
    if not N_sorted or N_sorted[0] < 2:
        raise DomainError(f"Convergence sweeps need N >= 2, got {N_sorted}.")
    for N in N_sorted:
        sector_dimension(p.d, N)
    result = hartree_minimize(p, **(minimize_options or {}))
    e_H = result.e_H

    def row(N: int) -> dict:
        energy = ground_energy(p, N)
        distance = minimizer_hull_distance(ground_state_rdm1(p, N), result.minimizers, p)
        return {"N": N, "E": energy, "EperN": energy / N, "eH": e_H, "gap": e_H - energy / N, "rdmDistance": distance}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(row, N_sorted))
    frame = pd.DataFrame.from_records(records)

    tol = DEFAULT_TOLERANCES.monotonicity
    upper = int((frame["gap"] < -tol).sum())
    monotone = int((np.diff(frame["EperN"].to_numpy()) < -tol).sum())
    fit_C, fit_residual = fit_inverse_n(frame["N"], frame["gap"])
    frame["fitC"] = fit_C
    frame["fitResidual"] = fit_residual
    frame = frame[["N", "E", "EperN", "eH", "gap", "fitC", "fitResidual", "rdmDistance"]]

    scaled = (frame["gap"] * frame["N"])[frame["N"] >= 4]
    scaled = scaled[scaled > tol]
    ratio = float(scaled.max() / scaled.min()) if len(scaled) else 1.0

    logging.info(f"Hartree sweep: e_H={e_H:.10f}, C={fit_C:.6g}, violations upper={upper} monotone={monotone}.")
    if strict and (upper or monotone):
        raise InvariantViolation(f"Hartree sweep invariants failed: {upper} upper-bound and {monotone} monotonicity violations.")
    return SweepResult(frame, e_H, fit_C, fit_residual, upper, monotone, ratio)


# Example usage
if __name__ == "__main__":
    problem = diagonal_problem()
    sweep = convergence_sweep(problem, range(2, 13))
    print(sweep.rows.to_string(index=False))
