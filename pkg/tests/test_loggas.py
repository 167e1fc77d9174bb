import numpy as np
import pandas as pd
import pytest

from src.exceptions import DomainError
from src.loggas import (
    EULER_GAMMA,
    LogGasConfig,
    MetropolisRun,
    RadialDensity,
    batch_means,
    conditional_min_eigenvalue,
    effective_sample_size,
    fit_brackets,
    free_energy_estimate,
    gaussian_free_energy,
    gelman_rubin,
    histogram_agreement,
    marginal_convergence,
    mean_field_energy,
    metropolis_sample,
    mf_minimize,
    neg_log_alpha,
    project_simplex,
    radial_wasserstein,
    radial_wasserstein_with_error,
    regularization_study,
    rejection_sample_single,
    run_chains,
    shell_kernel,
    shell_radii,
    total_energy,
    two_particle_log_z,
    two_shell_search,
    wasserstein_trend,
)

# uniform disk of radius 1/sqrt(2): 3/8 + log(2)/4
CONTINUUM_E_MF = 0.375 + np.log(2.0) / 4.0


@pytest.fixture(scope="module")
def mean_field():
    return mf_minimize(LogGasConfig(N=8, beta=2.0))


def test_config_validation():
    with pytest.raises(DomainError):
        LogGasConfig(N=0, beta=1.0)
    with pytest.raises(DomainError):
        LogGasConfig(N=4, beta=0.0)
    with pytest.raises(DomainError):
        LogGasConfig(N=4, beta=1.0, alpha=-0.1)
    with pytest.raises(DomainError):
        LogGasConfig(N=4, beta=1.0, box_radius=0.5)
    cfg = LogGasConfig(N=5, beta=1.0)
    assert cfg.coupling == pytest.approx(0.25)
    assert cfg.support_radius == pytest.approx(1 / np.sqrt(2))
    assert LogGasConfig(N=1, beta=1.0).coupling == 0.0
    assert LogGasConfig(N=5, beta=1.0, interaction=False).coupling == 0.0


def test_neg_log_alpha():
    r = np.linspace(0.01, 2.0, 200)
    assert np.allclose(neg_log_alpha(r, 0.0), -np.log(r))
    regularized = neg_log_alpha(r, 0.3)
    assert np.all(regularized <= -np.log(r) + 1e-15)
    assert np.allclose(regularized[r >= 0.3], -np.log(r[r >= 0.3]))
    assert neg_log_alpha(np.array([0.0]), 0.3)[0] == pytest.approx(-np.log(0.3) + 0.5)


def test_total_energy_of_pair():
    cfg = LogGasConfig(N=2, beta=1.0)
    positions = np.array([[0.5, 0.0], [-0.5, 0.0]])
    assert total_energy(positions, cfg) == pytest.approx(0.5 - np.log(1.0))
    positions = np.array([[0.3, 0.0], [0.0, 0.4]])
    assert total_energy(positions, cfg) == pytest.approx(0.09 + 0.16 - np.log(0.5))


def test_project_simplex():
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = project_simplex(rng.normal(size=7))
        assert p.sum() == pytest.approx(1.0)
        assert np.all(p >= 0)
    point = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(point), point)


def test_shell_kernel_is_conditionally_positive():
    radii = shell_radii(1.5, 64)
    assert radii[0] == pytest.approx(1.5 / 128)
    G = shell_kernel(radii, 1.5 / 64)
    assert conditional_min_eigenvalue(G) >= -1e-10


def test_mean_field_energy_matches_continuum(mean_field):
    assert mean_field.e_MF == pytest.approx(CONTINUUM_E_MF, abs=1e-2)
    assert mean_field.min_conditional_eigenvalue >= -1e-10
    # uniform disk of radius R has E r^2 = R^2 / 2
    assert mean_field.density.mean_square_radius() == pytest.approx(0.25, abs=0.02)
    assert mean_field.density.weights.sum() == pytest.approx(1.0)


def test_mean_field_energy_recomputes(mean_field):
    cfg = LogGasConfig(N=8, beta=2.0)
    h = cfg.box_radius / cfg.grid
    assert mean_field_energy(mean_field.density, cfg, alpha=h) == pytest.approx(mean_field.e_MF, abs=1e-10)


def test_non_interacting_mass_sits_at_the_origin():
    cfg = LogGasConfig(N=4, beta=1.0, interaction=False)
    result = mf_minimize(cfg)
    assert result.density.weights[0] == pytest.approx(1.0)
    assert result.e_MF == pytest.approx(cfg.potential(result.density.radii[0]))


def test_two_shell_search_brackets_mean_field(mean_field):
    best = two_shell_search(LogGasConfig(N=8, beta=2.0))
    assert best["energy"] >= mean_field.e_MF - 1e-2
    assert best["energy"] - mean_field.e_MF < 0.05
    assert 0.0 < best["q"] < 1.0


def test_regularization_study_columns():
    frame = regularization_study(LogGasConfig(N=8, beta=2.0), alpha=0.1, halvings=2, grid=64)
    assert list(frame.columns) == ["alpha", "e_MF", "change"]
    assert len(frame) == 3
    assert np.isnan(frame["change"].iloc[0])


def test_mean_field_rejects_coarse_grid():
    with pytest.raises(DomainError):
        mf_minimize(LogGasConfig(N=4, beta=1.0), grid=32)


def test_radial_density_and_wasserstein():
    density = RadialDensity(np.array([0.5, 1.0]), np.array([1.0, 0.0]))
    assert radial_wasserstein(np.full(10, 0.5), density) == pytest.approx(0.0, abs=1e-14)
    assert list(density.to_frame().columns) == ["radius", "mass"]
    with pytest.raises(DomainError):
        RadialDensity(np.array([0.5, 1.0]), np.array([0.7, 0.7]))


def _run_at_radii(radii: np.ndarray) -> MetropolisRun:
    steps, N = radii.shape
    positions = np.stack([radii, np.zeros_like(radii)], axis=-1)
    return MetropolisRun(positions, np.zeros(steps), np.zeros(steps), 0.4, 0.1, False, 0)


def test_wasserstein_error_from_chunks():
    density = RadialDensity(np.array([0.5]), np.array([1.0]))
    exact = _run_at_radii(np.full((40, 3), 0.5))
    assert radial_wasserstein_with_error([exact], density) == pytest.approx((0.0, 0.0), abs=1e-14)
    # chunks at radius 0.5, 0.6, 0.7, 0.8
    shifted = _run_at_radii(np.repeat(np.array([0.5, 0.6, 0.7, 0.8]), 10)[:, None] * np.ones((1, 2)))
    distance, error = radial_wasserstein_with_error([shifted], density)
    assert distance == pytest.approx(0.15)
    assert error == pytest.approx(np.std([0.0, 0.1, 0.2, 0.3], ddof=1) / 2.0)


def test_wasserstein_trend_counts_increases_beyond_error():
    decreasing = pd.DataFrame({"N": [4, 8, 16], "w1": [0.3, 0.2, 0.1], "w1_err": [0.01, 0.01, 0.01]})
    assert wasserstein_trend(decreasing) == {"monotone": True, "increases": 0}
    within_error = pd.DataFrame({"N": [16, 4, 8], "w1": [0.21, 0.3, 0.2], "w1_err": [0.01, 0.01, 0.01]})
    assert wasserstein_trend(within_error)["monotone"] is True
    growing = pd.DataFrame({"N": [4, 8, 16], "w1": [0.1, 0.2, 0.1], "w1_err": [0.01, 0.01, 0.01]})
    assert wasserstein_trend(growing) == {"monotone": False, "increases": 1}
    no_interaction = pd.DataFrame({"N": [4, 8], "w1": [np.nan, np.nan], "w1_err": [np.nan, np.nan]})
    assert wasserstein_trend(no_interaction) == {"monotone": None, "increases": 0}


def test_two_particle_partition_function():
    # closed form separates the centre of mass, the quadrature does not
    for beta in (0.5, 1.0, 2.0):
        closed, numeric = two_particle_log_z(beta)
        assert closed == pytest.approx(numeric, abs=1e-6)
    closed, numeric = two_particle_log_z(1.0, strength=3.0)
    assert closed == pytest.approx(numeric, abs=1e-6)


def test_gaussian_free_energy_paths():
    cfg = LogGasConfig(N=6, beta=2.0, interaction=False)
    estimate = free_energy_estimate(cfg, [])
    assert estimate.free_energy == pytest.approx(gaussian_free_energy(cfg))
    assert estimate.error == 0.0
    single = free_energy_estimate(LogGasConfig(N=1, beta=1.5), [])
    assert single.free_energy == pytest.approx(-np.log(np.pi / 1.5) / 1.5)


def test_free_energy_needs_quadratic_confinement():
    with pytest.raises(DomainError):
        free_energy_estimate(LogGasConfig(N=3, beta=1.0, power=4.0), [0.5])


def test_free_energy_rejects_regularized_gas():
    with pytest.raises(DomainError, match="alpha"):
        free_energy_estimate(LogGasConfig(N=2, beta=1.0, alpha=0.3), [0.5], steps=400)
    # without interaction the regularization plays no role
    plain = free_energy_estimate(LogGasConfig(N=3, beta=1.0, alpha=0.3, interaction=False), [])
    assert plain.free_energy == pytest.approx(gaussian_free_energy(LogGasConfig(N=3, beta=1.0, interaction=False)))


def test_batch_means_and_ess():
    mean, stderr = batch_means(np.ones(100))
    assert mean == 1.0 and stderr == 0.0
    series = np.random.default_rng(1).normal(size=4000)
    _, stderr = batch_means(series)
    assert stderr == pytest.approx(1 / np.sqrt(4000), rel=0.5)
    assert 1000 < effective_sample_size(series) <= 4000
    with pytest.raises(DomainError):
        batch_means(np.ones(10))


def test_gelman_rubin():
    rng = np.random.default_rng(2)
    mixed = [rng.normal(size=2000) for _ in range(4)]
    assert gelman_rubin(mixed) < 1.05
    stuck = [rng.normal(loc=3.0 * k, size=2000) for k in range(4)]
    assert gelman_rubin(stuck) > 1.5
    with pytest.raises(DomainError):
        gelman_rubin([np.ones(5)])


def test_fit_brackets_recovers_coefficients():
    N = np.array([4, 8, 16, 32, 64])
    values = CONTINUUM_E_MF + 0.3 * np.log(N) / N + 0.1 / N
    fit = fit_brackets(N, values, CONTINUUM_E_MF)
    assert fit["log_coefficient"] == pytest.approx(0.3, abs=1e-8)
    assert fit["inverse_coefficient"] == pytest.approx(0.1, abs=1e-8)
    assert fit["c_lower"] == [0.0] * 5
    assert all(c > 0 for c in fit["c_upper"])


def test_sampler_rejects_empty_run():
    with pytest.raises(DomainError):
        metropolis_sample(LogGasConfig(N=2, beta=1.0), steps=0, seed=0)
    with pytest.raises(DomainError):
        rejection_sample_single(LogGasConfig(N=2, beta=1.0), 10, 0)


@pytest.mark.slow
def test_single_particle_mean_square_radius():
    cfg = LogGasConfig(N=1, beta=2.0, burn_in=2_000)
    run = metropolis_sample(cfg, steps=20_000, seed=3)
    mean, stderr = batch_means(run.mean_square_radius())
    assert abs(mean - 1.0 / (cfg.beta * cfg.strength)) <= 4 * stderr + 1e-3
    assert not run.flagged


@pytest.mark.slow
def test_single_particle_matches_rejection_sampler():
    cfg = LogGasConfig(N=1, beta=1.0, burn_in=2_000)
    run = metropolis_sample(cfg, steps=20_000, seed=4)
    exact = rejection_sample_single(cfg, 20_000, seed=5)
    exact_radii = np.hypot(exact[:, 0], exact[:, 1])
    ess = effective_sample_size(run.mean_square_radius())
    assert histogram_agreement(run.radii(), exact_radii, ess, exact_radii.shape[0]) < 6.0


@pytest.mark.slow
def test_metropolis_adapts_and_is_reproducible():
    cfg = LogGasConfig(N=4, beta=2.0, burn_in=1_000)
    first = metropolis_sample(cfg, steps=1_000, seed=7)
    second = metropolis_sample(cfg, steps=1_000, seed=7)
    assert np.array_equal(first.positions, second.positions)
    assert 0.2 < first.acceptance < 0.6
    assert not first.flagged
    frame = first.time_series()
    assert list(frame.columns) == ["sweep", "energy", "mean_r2", "log_pair_sum"]
    assert len(frame) == 1_000


@pytest.mark.slow
def test_chains_mix():
    cfg = LogGasConfig(N=4, beta=2.0, burn_in=1_000)
    runs = run_chains(cfg, steps=2_000, seeds=[0, 1, 2], threads=3)
    assert [run.seed for run in runs] == [0, 1, 2]
    assert gelman_rubin([run.energies for run in runs]) < 1.1


@pytest.mark.slow
def test_two_particle_thermodynamic_integration():
    cfg = LogGasConfig(N=2, beta=1.0, burn_in=2_000)
    estimate = free_energy_estimate(cfg, [0.25, 0.5, 0.75], steps=4_000, seed=11)
    closed, _ = two_particle_log_z(1.0)
    assert abs(estimate.log_Z - closed) <= 4 * cfg.beta * cfg.N * estimate.error + 0.05
    reference = estimate.integration.iloc[0]
    assert reference["mean"] == pytest.approx(0.5 * (np.log(2.0) - EULER_GAMMA))
    assert list(estimate.integration["kappa"]) == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])


@pytest.mark.slow
def test_marginal_convergence_columns():
    cfg = LogGasConfig(N=4, beta=2.0, burn_in=500, grid=64)
    frame = marginal_convergence(cfg, [4, 2], steps=500)
    assert list(frame.columns) == ["N", "w1", "w1_err", "acceptance"]
    assert list(frame["N"]) == [2, 4]
    assert np.all(frame["w1"] > 0)
