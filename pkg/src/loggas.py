"""
Two-dimensional log-gas at mean-field scaling.

The N-particle energy is H_N(X) = sum_i V(x_i) + (1/(N-1)) sum_{i<j} w(x_i - x_j)
with w = -log|.| (optionally the regularized -log_alpha) and V(x) = c|x|^p,
sampled at Gibbs weight exp(-beta N H_N). The mean-field problem is solved on
concentric shells, where the circle-averaged kernel is -log max(r, s).

Results here carry Monte Carlo error bars rather than exact tolerances.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb, lgamma
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import integrate, stats
from scipy.linalg import null_space
from scipy.spatial.distance import pdist

from src.exceptions import DomainError
from src.settings import DEFAULT_TOLERANCES

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

ACCEPTANCE_WINDOW = (0.05, 0.95)
TARGET_ACCEPTANCE = 0.4


@dataclass(frozen=True)
class LogGasConfig:
    """
    Parameters:
    N (int): Particle count.
    beta (float): Inverse temperature, beta > 0.
    strength (float): c in V(x) = c |x|^power.
    power (float): Exponent of the radial potential.
    alpha (float): Regularization length of -log_alpha; 0 keeps -log.
    interaction (bool): Switches the pair interaction on or off.
    grid (int): Number of radial shells for the mean-field problem.
    box_radius (float): Outer radius of the shell grid.
    burn_in (int): Adaptation sweeps before recording.
    """

    N: int
    beta: float
    strength: float = 1.0
    power: float = 2.0
    alpha: float = 0.0
    interaction: bool = True
    grid: int = 128
    box_radius: float = 1.5
    burn_in: int = 10_000

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"Log-gas needs N >= 1, got {self.N}.")
        if not self.beta > 0:
            raise DomainError(f"Inverse temperature must be positive, got {self.beta}.")
        if self.alpha < 0:
            raise DomainError(f"Regularization alpha must be >= 0, got {self.alpha}.")
        if self.strength <= 0 or self.power <= 0:
            raise DomainError("The confining potential needs strength > 0 and power > 0.")
        if self.burn_in < 0:
            raise DomainError(f"Burn-in must be >= 0, got {self.burn_in}.")
        if self.box_radius < 1.05 * self.support_radius:
            logging.error(f"Box radius {self.box_radius} does not cover the support radius {self.support_radius:.4f}.")
            raise DomainError(f"Box radius {self.box_radius} does not cover the support radius {self.support_radius:.4f}.")

    @property
    def support_radius(self) -> float:
        """Radius of the mean-field support for V = c r^p: (1/(c p))^(1/p)."""
        return (1.0 / (self.strength * self.power)) ** (1.0 / self.power)

    @property
    def is_quadratic(self) -> bool:
        return self.power == 2.0

    @property
    def coupling(self) -> float:
        return 1.0 / (self.N - 1) if self.N >= 2 and self.interaction else 0.0

    def potential(self, r: np.ndarray) -> np.ndarray:
        return self.strength * np.abs(r) ** self.power

    def length_scale(self) -> float:
        """Per-coordinate standard deviation of the non-interacting quadratic gas."""
        return 1.0 / np.sqrt(2.0 * self.beta * self.N * self.strength)


def neg_log_alpha(r: np.ndarray, alpha: float) -> np.ndarray:
    """
    -log_alpha(r): -log r for r >= alpha, -log alpha + (1 - r^2/alpha^2)/2 below.
    It never exceeds -log r.
    """
    r = np.asarray(r, dtype=float)
    if alpha <= 0:
        return -np.log(r)
    inner = -np.log(alpha) + 0.5 * (1.0 - (r / alpha) ** 2)
    return np.where(r >= alpha, -np.log(np.maximum(r, alpha)), inner)


def total_energy(positions: np.ndarray, cfg: LogGasConfig) -> float:
    """H_N of one configuration of shape (N, 2)."""
    radii = np.hypot(positions[:, 0], positions[:, 1])
    energy = float(cfg.potential(radii).sum())
    if cfg.coupling:
        energy += cfg.coupling * float(neg_log_alpha(pdist(positions), cfg.alpha).sum())
    return energy


# ---------------------------------------------------------------------------
# Metropolis sampling
# ---------------------------------------------------------------------------
@dataclass
class MetropolisRun:
    positions: np.ndarray
    energies: np.ndarray
    log_pair_sums: np.ndarray
    acceptance: float
    step_size: float
    flagged: bool
    seed: int

    def radii(self) -> np.ndarray:
        return np.hypot(self.positions[..., 0], self.positions[..., 1]).ravel()

    def mean_square_radius(self) -> np.ndarray:
        """Per-sweep average of |x|^2 over particles."""
        return (self.positions**2).sum(axis=2).mean(axis=1)

    def time_series(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "sweep": np.arange(self.energies.shape[0]),
                "energy": self.energies,
                "mean_r2": self.mean_square_radius(),
                "log_pair_sum": self.log_pair_sums,
            }
        )


def metropolis_sample(cfg: LogGasConfig, steps: int, seed: int, burn_in: Optional[int] = None) -> MetropolisRun:
    """
    Single-particle Metropolis chain targeting exp(-beta N H_N).

    The Gaussian proposal width is tuned toward 40% acceptance during burn-in
    and frozen afterwards; one configuration is recorded per sweep.

    Parameters:
    cfg (LogGasConfig): Gas parameters.
    steps (int): Recorded sweeps.
    seed (int): Seed of the chain.
    burn_in (Optional[int]): Adaptation sweeps, defaults to cfg.burn_in.

    Returns:
    MetropolisRun: Configurations, per-sweep energies and sum_{i<j} log|x_i - x_j|,
    the post-adaptation acceptance rate and a flag when that rate leaves [0.05, 0.95].
    """
    burn_in = cfg.burn_in if burn_in is None else burn_in
    if steps < 1:
        raise DomainError(f"Need at least one recorded sweep, got {steps}.")
    rng = np.random.default_rng(seed)
    N = cfg.N
    scale = cfg.length_scale()
    sigma = scale
    x = rng.normal(scale=scale, size=(N, 2))
    prefactor = cfg.beta * N

    def local_energy(i: int, point: np.ndarray) -> float:
        value = float(cfg.potential(np.hypot(point[0], point[1])))
        if cfg.coupling:
            distances = np.hypot(x[:, 0] - point[0], x[:, 1] - point[1])
            distances[i] = 1.0
            terms = neg_log_alpha(distances, cfg.alpha)
            terms[i] = 0.0
            value += cfg.coupling * float(terms.sum())
        return value

    positions = np.empty((steps, N, 2))
    energies = np.empty(steps)
    log_pairs = np.empty(steps)
    window_accepts = 0
    accepted = 0
    for sweep in range(burn_in + steps):
        for i in range(N):
            proposal = x[i] + sigma * rng.standard_normal(2)
            delta = local_energy(i, proposal) - local_energy(i, x[i])
            if delta <= 0 or rng.random() < np.exp(-prefactor * delta):
                x[i] = proposal
                if sweep < burn_in:
                    window_accepts += 1
                else:
                    accepted += 1
        if sweep < burn_in:
            if (sweep + 1) % 100 == 0:
                rate = window_accepts / (100 * N)
                sigma = float(np.clip(sigma * np.exp(rate - TARGET_ACCEPTANCE), 1e-4 * scale, 1e2 * scale))
                window_accepts = 0
            continue
        k = sweep - burn_in
        positions[k] = x
        energies[k] = total_energy(x, cfg)
        log_pairs[k] = float(-neg_log_alpha(pdist(x), cfg.alpha).sum()) if N >= 2 else 0.0

    acceptance = accepted / (steps * N)
    flagged = not ACCEPTANCE_WINDOW[0] <= acceptance <= ACCEPTANCE_WINDOW[1]
    logging.info(f"Metropolis N={N} beta={cfg.beta} seed={seed}: acceptance {acceptance:.3f}, step {sigma:.4g}.")
    if flagged:
        logging.warning(f"Acceptance rate {acceptance:.3f} is outside {ACCEPTANCE_WINDOW} after adaptation.")
    return MetropolisRun(positions, energies, log_pairs, acceptance, sigma, flagged, seed)


def run_chains(cfg: LogGasConfig, steps: int, seeds: Sequence[int], threads: int = 1) -> List[MetropolisRun]:
    """Independent chains, one per seed, returned in seed order."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return list(executor.map(lambda s: metropolis_sample(cfg, steps, s), seeds))


def batch_means(series: np.ndarray, batches: int = 20):
    """Mean and batch-means standard error of a correlated series."""
    series = np.asarray(series, dtype=float)
    usable = (series.shape[0] // batches) * batches
    if usable == 0:
        raise DomainError(f"Series of length {series.shape[0]} is shorter than {batches} batches.")
    means = series[:usable].reshape(batches, -1).mean(axis=1)
    return float(series.mean()), float(means.std(ddof=1) / np.sqrt(batches))


def effective_sample_size(series: np.ndarray, batches: int = 20) -> float:
    series = np.asarray(series, dtype=float)
    _, stderr = batch_means(series, batches)
    variance = series.var(ddof=1)
    if stderr == 0:
        return float(series.shape[0])
    return float(min(series.shape[0], variance / stderr**2))


def gelman_rubin(chains: Sequence[np.ndarray]) -> float:
    """Potential scale reduction factor of equally long scalar chains."""
    data = np.array([np.asarray(c, dtype=float) for c in chains])
    m, n = data.shape
    if m < 2 or n < 2:
        raise DomainError("Gelman-Rubin needs at least two chains of length two.")
    within = data.var(axis=1, ddof=1).mean()
    between = n * data.mean(axis=1).var(ddof=1)
    pooled = (n - 1) / n * within + between / n
    return float(np.sqrt(pooled / within))


def rejection_sample_single(cfg: LogGasConfig, count: int, seed: int, half_width: Optional[float] = None) -> np.ndarray:
    """Exact draws of one particle with density proportional to exp(-beta V) by box rejection."""
    if cfg.N != 1:
        raise DomainError("The rejection sampler covers the single-particle gas only.")
    rng = np.random.default_rng(seed)
    L = 8.0 * cfg.length_scale() if half_width is None else half_width
    accepted: List[np.ndarray] = []
    total = 0
    while total < count:
        proposals = rng.uniform(-L, L, size=(4 * count, 2))
        weights = np.exp(-cfg.beta * cfg.potential(np.hypot(proposals[:, 0], proposals[:, 1])))
        keep = proposals[rng.random(proposals.shape[0]) < weights]
        accepted.append(keep)
        total += keep.shape[0]
    return np.concatenate(accepted)[:count]


def histogram_agreement(a: np.ndarray, b: np.ndarray, ess_a: float, ess_b: float, bins: int = 10) -> float:
    """Largest bin-wise deviation in standard errors between two samples of radii."""
    edges = np.quantile(np.concatenate([a, b]), np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    pa = np.histogram(a, edges)[0] / a.shape[0]
    pb = np.histogram(b, edges)[0] / b.shape[0]
    pooled = 0.5 * (pa + pb)
    sigma = np.sqrt(pooled * (1 - pooled) * (1.0 / ess_a + 1.0 / ess_b))
    return float(np.max(np.abs(pa - pb) / np.where(sigma > 0, sigma, np.inf)))


# ---------------------------------------------------------------------------
# Mean-field problem on shells
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RadialDensity:
    """Masses on concentric shells of radius radii."""

    radii: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if np.any(weights < -1e-15):
            raise DomainError("Radial density has negative mass.")
        if abs(weights.sum() - 1.0) > DEFAULT_TOLERANCES.normalization:
            raise DomainError(f"Radial density has total mass {weights.sum()}.")
        object.__setattr__(self, "weights", np.clip(weights, 0.0, None))

    def mean_square_radius(self) -> float:
        return float(np.dot(self.weights, self.radii**2))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"radius": self.radii, "mass": self.weights})


@dataclass
class MeanFieldResult:
    e_MF: float
    density: RadialDensity
    iterations: int
    converged: bool
    min_conditional_eigenvalue: float


def shell_radii(box_radius: float, grid: int) -> np.ndarray:
    h = box_radius / grid
    return (np.arange(grid) + 0.5) * h


def shell_kernel(radii: np.ndarray, alpha: float) -> np.ndarray:
    """Circle-averaged interaction -log_alpha(max(r_k, r_l))."""
    return neg_log_alpha(np.maximum(radii[:, None], radii[None, :]), alpha)


def conditional_min_eigenvalue(G: np.ndarray) -> float:
    """Smallest eigenvalue of G on zero-mass perturbations."""
    basis = null_space(np.ones((1, G.shape[0])))
    return float(np.linalg.eigvalsh(basis.T @ G @ basis)[0])


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def shell_energy(weights: np.ndarray, V: np.ndarray, G: np.ndarray) -> float:
    return float(weights @ V + 0.5 * weights @ G @ weights)


def mf_minimize(
    cfg: LogGasConfig,
    grid: Optional[int] = None,
    alpha: Optional[float] = None,
    max_iter: int = 20_000,
    tol: float = 1e-13,
) -> MeanFieldResult:
    """
    Minimizes ∫ V dρ - (1/2)∬ log|x-y| dρ dρ over radial densities on a shell grid.

    Parameters:
    cfg (LogGasConfig): Potential, box radius and interaction switch.
    grid (Optional[int]): Shell count, at least 64; defaults to cfg.grid.
    alpha (Optional[float]): Kernel regularization; defaults to cfg.alpha when
        positive, otherwise to the shell spacing.
    max_iter (int): Iteration cap of the accelerated projected gradient.
    tol (float): Stop when no shell mass moves by more than tol.

    Returns:
    MeanFieldResult: e_MF, the minimizing RadialDensity, iteration count,
    convergence flag and the conditional eigenvalue certificate.
    """
    grid = cfg.grid if grid is None else grid
    if grid < 64:
        raise DomainError(f"Radial grid needs at least 64 shells, got {grid}.")
    radii = shell_radii(cfg.box_radius, grid)
    h = cfg.box_radius / grid
    alpha = (cfg.alpha if cfg.alpha > 0 else h) if alpha is None else alpha
    V = cfg.potential(radii)
    G = shell_kernel(radii, alpha) if cfg.interaction else np.zeros((grid, grid))

    certificate = conditional_min_eigenvalue(G)
    if certificate < -1e-10 * max(1.0, np.max(np.abs(G))):
        logging.error(f"Shell kernel is not conditionally PSD at alpha={alpha}: eigenvalue {certificate}.")
        raise DomainError(f"Shell kernel is not conditionally positive semidefinite at alpha={alpha} (eigenvalue {certificate}).")

    basis = null_space(np.ones((1, grid)))
    lipschitz = max(float(np.linalg.eigvalsh(basis.T @ G @ basis)[-1]), 1e-12)
    p = np.full(grid, 1.0 / grid)
    y = p.copy()
    momentum = 1.0
    value = shell_energy(p, V, G)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        candidate = project_simplex(y - (V + G @ y) / lipschitz)
        candidate_value = shell_energy(candidate, V, G)
        if candidate_value > value:
            # adaptive restart
            y, momentum = p.copy(), 1.0
            continue
        next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum**2))
        y = candidate + ((momentum - 1.0) / next_momentum) * (candidate - p)
        moved = float(np.max(np.abs(candidate - p)))
        p, value, momentum = candidate, candidate_value, next_momentum
        if moved < tol:
            converged = True
            break
    if not converged:
        logging.warning(f"Mean-field minimization stopped after {max_iter} iterations.")
    logging.info(f"Mean-field energy on {grid} shells: {value:.8f}.")
    density = RadialDensity(radii, p / p.sum())
    return MeanFieldResult(value, density, iteration, converged, certificate)


def mean_field_energy(density: RadialDensity, cfg: LogGasConfig, alpha: float = 0.0) -> float:
    G = shell_kernel(density.radii, alpha) if cfg.interaction else np.zeros((density.radii.shape[0],) * 2)
    return shell_energy(density.weights, cfg.potential(density.radii), G)


def two_shell_search(cfg: LogGasConfig, radii_count: int = 60, mass_steps: int = 61) -> dict:
    """Exhaustive minimum over densities carried by at most two shells."""
    radii = np.linspace(cfg.box_radius / radii_count, cfg.box_radius, radii_count)
    q = np.linspace(0.0, 1.0, mass_steps)
    ra, rb, qq = np.meshgrid(radii, radii, q, indexing="ij")
    w = (lambda r: -np.log(r)) if cfg.interaction else (lambda r: 0.0 * r)
    energy = (
        qq * cfg.potential(ra)
        + (1 - qq) * cfg.potential(rb)
        + 0.5 * (qq**2 * w(ra) + (1 - qq) ** 2 * w(rb) + 2 * qq * (1 - qq) * w(np.maximum(ra, rb)))
    )
    flat = int(np.argmin(energy))
    i, j, k = np.unravel_index(flat, energy.shape)
    return {"energy": float(energy.flat[flat]), "r_a": float(radii[i]), "r_b": float(radii[j]), "q": float(q[k])}


def regularization_study(cfg: LogGasConfig, alpha: float, halvings: int = 4, grid: Optional[int] = None) -> pd.DataFrame:
    """e_MF at alpha, alpha/2, ... with the successive differences."""
    rows = []
    for step in range(halvings + 1):
        a = alpha / 2**step
        rows.append({"alpha": a, "e_MF": mf_minimize(cfg, grid=grid, alpha=a).e_MF})
    frame = pd.DataFrame(rows)
    frame["change"] = frame["e_MF"].diff().abs()
    return frame


def radial_wasserstein(radii_samples: np.ndarray, density: RadialDensity) -> float:
    """1-Wasserstein distance between sampled radii and a shell density."""
    return float(stats.wasserstein_distance(radii_samples, density.radii, v_weights=density.weights))


def radial_wasserstein_with_error(runs: Sequence[MetropolisRun], density: RadialDensity, chunks: int = 4):
    """
    1-Wasserstein distance of the pooled radii of runs to a shell density, with
    the standard error from the spread over consecutive chunks of sweeps.
    """
    per_sweep = np.concatenate([np.hypot(run.positions[..., 0], run.positions[..., 1]) for run in runs])
    distance = radial_wasserstein(per_sweep.ravel(), density)
    if per_sweep.shape[0] < chunks:
        return distance, float("nan")
    parts = [radial_wasserstein(part.ravel(), density) for part in np.array_split(per_sweep, chunks)]
    return distance, float(np.std(parts, ddof=1) / np.sqrt(chunks))


def wasserstein_trend(frame: pd.DataFrame) -> dict:
    """
    Counts increases of w1 between consecutive N larger than the combined
    error bars. `monotone` is True when there are none.
    """
    ordered = frame.sort_values("N")
    w1 = ordered["w1"].to_numpy(dtype=float)
    err = ordered["w1_err"].to_numpy(dtype=float)
    if len(w1) < 2 or np.isnan(w1).any():
        return {"monotone": None, "increases": 0}
    increases = int((np.diff(w1) > np.nan_to_num(err[1:] + err[:-1])).sum())
    if increases:
        logging.warning(f"Radial W1 grows with N at {increases} step(s): {w1.tolist()}.")
    return {"monotone": increases == 0, "increases": increases}


# ---------------------------------------------------------------------------
# Free energy
# ---------------------------------------------------------------------------
EULER_GAMMA = 0.5772156649015329


@dataclass
class FreeEnergyEstimate:
    """F = -(1/(beta N)) log Z_N with its standard error; per_particle = F/N."""

    free_energy: float
    error: float
    per_particle: float
    log_Z: float
    integration: pd.DataFrame = field(default_factory=pd.DataFrame)


def gaussian_free_energy(cfg: LogGasConfig) -> float:
    """Interaction-off value -(1/beta) log(pi/(beta N c)) for V = c|x|^2."""
    return -np.log(np.pi / (cfg.beta * cfg.N * cfg.strength)) / cfg.beta


def two_particle_log_z(beta: float, strength: float = 1.0):
    """
    log Z_2 for V = c|x|^2, where
    Z_2 = ∫∫ exp(-2 beta c (|x_1|^2 + |x_2|^2)) |x_1 - x_2|^{2 beta} dx_1 dx_2.

    The closed form comes from centre-of-mass separation. The quadrature value
    integrates the particle coordinates directly: rotation invariance fixes
    x_1 on the positive axis, leaving (r_1, r_2, angle between them).

    Returns:
    tuple: (closed form, quadrature).
    """
    bc = beta * strength
    closed = np.log(np.pi / (4 * bc)) + np.log(np.pi) + lgamma(beta + 1) - (beta + 1) * np.log(bc)

    # lengths in units of 1/sqrt(2 beta c); the Gaussian factor is below e^-49 past 7
    scale = 1.0 / np.sqrt(2.0 * bc)

    def integrand(theta: float, s2: float, s1: float) -> float:
        separation2 = max(s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * np.cos(theta), 0.0)
        return s1 * s2 * np.exp(-(s1 * s1 + s2 * s2)) * separation2**beta

    value, _ = integrate.tplquad(integrand, 0.0, 7.0, 0.0, 7.0, 0.0, np.pi, epsabs=0.0, epsrel=1e-8)
    # 2 pi for the direction of x_1, 2 for theta in (pi, 2 pi)
    numeric = np.log(4.0 * np.pi * value) + (4.0 + 2.0 * beta) * np.log(scale)
    return float(closed), float(numeric)


def free_energy_estimate(
    cfg: LogGasConfig,
    beta_grid: Sequence[float],
    steps: int = 20_000,
    seed: int = 0,
    burn_in: Optional[int] = None,
    overlap_factor: float = 2.0,
    threads: int = 1,
) -> FreeEnergyEstimate:
    """
    Thermodynamic integration of log Z_N for V = c|x|^2.

    In the scaled coordinates y = sqrt(beta N c) x,
    Z_N = (beta N c)^{-N - kappa binomial(N,2)/2} J(kappa) with kappa = beta N/(N-1)
    and J(kappa) = ∫ exp(-sum |y_i|^2 + kappa sum_{i<j} log|y_i - y_j|) dy.
    log J is integrated from the Gaussian reference J(0) = pi^N along the
    kappa values of beta_grid, using Metropolis averages of sum log|y_i - y_j|.

    Parameters:
    cfg (LogGasConfig): Gas at the target beta.
    beta_grid (Sequence[float]): Increasing inverse temperatures ending at cfg.beta.
    steps (int): Recorded sweeps per grid point.
    seed (int): Base seed; grid point i uses seed + i.
    burn_in (Optional[int]): Adaptation sweeps per grid point.
    overlap_factor (float): Refuse when adjacent means differ by more than this
        many pooled standard deviations of the integrand.
    threads (int): Worker threads over grid points.

    Returns:
    FreeEnergyEstimate: F = -(1/(beta N)) log Z_N with propagated error.
    """
    if not cfg.is_quadratic:
        raise DomainError("Thermodynamic integration is implemented for quadratic confinement only.")
    if cfg.alpha > 0 and cfg.coupling:
        # the Gaussian reference mean of sum log|y_ij| holds for the bare logarithm
        logging.error(f"Thermodynamic integration requested for the regularized gas alpha={cfg.alpha}.")
        raise DomainError(f"Thermodynamic integration needs alpha = 0, got alpha={cfg.alpha}.")
    N, beta, c = cfg.N, cfg.beta, cfg.strength
    if N == 1 or not cfg.interaction:
        log_Z = N * np.log(np.pi / (beta * N * c))
        F = -log_Z / (beta * N)
        return FreeEnergyEstimate(F, 0.0, F / N, float(log_Z))

    betas = np.asarray(sorted(b for b in beta_grid if 0 < b < beta) + [beta], dtype=float)
    pairs = comb(N, 2)

    def point(item):
        index, b = item
        run = metropolis_sample(LogGasConfig(N=N, beta=float(b), strength=c, box_radius=cfg.box_radius, grid=cfg.grid, burn_in=cfg.burn_in), steps, seed + index, burn_in)
        # sum log|y_ij| = sum log|x_ij| + binomial(N,2) log(beta N c)/2
        series = run.log_pair_sums + 0.5 * pairs * np.log(b * N * c)
        mean, stderr = batch_means(series)
        return {"beta": float(b), "kappa": b * N / (N - 1), "mean": mean, "stderr": stderr, "std": float(series.std(ddof=1))}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(point, enumerate(betas)))
    reference = {"beta": 0.0, "kappa": 0.0, "mean": 0.5 * pairs * (np.log(2.0) - EULER_GAMMA), "stderr": 0.0, "std": 0.0}
    table = pd.DataFrame.from_records([reference] + records)

    for a, b in zip(table.index[1:-1], table.index[2:]):
        pooled = np.sqrt(0.5 * (table.at[a, "std"] ** 2 + table.at[b, "std"] ** 2))
        if abs(table.at[b, "mean"] - table.at[a, "mean"]) > overlap_factor * pooled:
            logging.error(f"Insufficient overlap between beta={table.at[a, 'beta']} and beta={table.at[b, 'beta']}.")
            raise DomainError(f"Insufficient overlap between beta={table.at[a, 'beta']} and beta={table.at[b, 'beta']}; refine beta_grid.")

    kappa = table["kappa"].to_numpy()
    widths = np.diff(kappa)
    weights = np.zeros_like(kappa)
    weights[:-1] += 0.5 * widths
    weights[1:] += 0.5 * widths
    log_J = N * np.log(np.pi) + float(weights @ table["mean"].to_numpy())
    log_J_err = float(np.sqrt(np.sum((weights * table["stderr"].to_numpy()) ** 2)))
    kappa_end = kappa[-1]
    log_Z = -(N + kappa_end * pairs / 2.0) * np.log(beta * N * c) + log_J
    F = -log_Z / (beta * N)
    error = log_J_err / (beta * N)
    logging.info(f"Thermodynamic integration N={N} beta={beta}: F={F:.6f} ± {error:.2e} over {len(kappa)} points.")
    return FreeEnergyEstimate(float(F), error, float(F / N), float(log_Z), table)


def fit_brackets(N_values: Sequence[int], per_particle: Sequence[float], e_MF: float) -> dict:
    """
    Fits f_N - e_MF ≈ a log(N)/N + b/N and reports the observed lower and upper
    bracket widths c(N) = max(e_MF - f_N, 0), c'(N) = max(f_N - e_MF, 0).
    """
    N = np.asarray(N_values, dtype=float)
    diff = np.asarray(per_particle, dtype=float) - e_MF
    X = np.column_stack([np.log(N) / N, 1.0 / N])
    model = sm.OLS(diff, X).fit()
    return {
        "log_coefficient": float(model.params[0]),
        "inverse_coefficient": float(model.params[1]),
        "c_lower": np.maximum(-diff, 0.0).tolist(),
        "c_upper": np.maximum(diff, 0.0).tolist(),
    }


def marginal_convergence(cfg: LogGasConfig, N_list: Sequence[int], steps: int, seed: int = 0, threads: int = 1) -> pd.DataFrame:
    """1-Wasserstein distance between sampled radii and the mean-field density for each N."""
    density = mf_minimize(cfg).density

    def row(N: int) -> dict:
        gas = LogGasConfig(N=N, beta=cfg.beta, strength=cfg.strength, power=cfg.power, alpha=cfg.alpha, box_radius=cfg.box_radius, grid=cfg.grid, burn_in=cfg.burn_in)
        run = metropolis_sample(gas, steps, seed + N)
        distance, error = radial_wasserstein_with_error([run], density)
        return {"N": N, "w1": distance, "w1_err": error, "acceptance": run.acceptance}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return pd.DataFrame.from_records(list(executor.map(row, sorted(N_list))))


# Example usage
if __name__ == "__main__":
    gas = LogGasConfig(N=8, beta=2.0)
    result = mf_minimize(gas)
    print(f"e_MF = {result.e_MF:.6f} (continuum {0.25 + 0.125 + np.log(2) / 4:.6f})")
    run = metropolis_sample(gas, steps=2_000, seed=0, burn_in=1_000)
    print(run.time_series().describe())
