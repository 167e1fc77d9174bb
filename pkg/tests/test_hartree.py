import numpy as np
import pytest

from src.exceptions import DomainError
from src.hartree import (
    HartreeProblem,
    convergence_sweep,
    diagonal_problem,
    finite_difference_gradient,
    fit_inverse_n,
    free_problem,
    ground_energy,
    ground_state_rdm1,
    hartree_energies,
    hartree_energy,
    hartree_minimize,
    minimizer_hull_distance,
    probe_minimum,
    random_problem,
    riemannian_gradient,
    start_frame,
)
from src.sphere import sample_sphere


@pytest.fixture(scope="module")
def diagonal():
    return diagonal_problem()


@pytest.fixture(scope="module")
def diagonal_sweep(diagonal):
    return convergence_sweep(diagonal, range(2, 13))


def test_diagonal_hartree_minimum(diagonal):
    result = hartree_minimize(diagonal)
    assert result.converged
    assert result.e_H == pytest.approx(0.75, abs=1e-8)
    assert abs(np.abs(result.u[0]) ** 2 - 0.5) < 1e-4


def test_diagonal_energy_formula(diagonal):
    # E_H = 1 - s + s^2 with s = |u_1|^2
    for s in (0.0, 0.25, 0.5, 1.0):
        u = np.array([np.sqrt(s), np.sqrt(1 - s) * 1j])
        assert hartree_energy(u, diagonal) == pytest.approx(1 - s + s * s, abs=1e-14)


def test_exact_three_particle_energy(diagonal):
    assert ground_energy(diagonal, 3) == pytest.approx(2.0, abs=1e-12)


def test_sweep_invariants(diagonal_sweep):
    rows = diagonal_sweep.rows
    assert list(rows.columns) == ["N", "E", "EperN", "eH", "gap", "fitC", "fitResidual", "rdmDistance"]
    assert diagonal_sweep.violations == 0
    assert np.all(rows["EperN"] <= rows["eH"] + 1e-10)
    assert np.all(np.diff(rows["EperN"]) >= -1e-10)
    assert diagonal_sweep.gapN_ratio < 3.0
    assert diagonal_sweep.fit_C > 0


def test_sweep_rdm_approaches_hull(diagonal_sweep):
    assert diagonal_sweep.rows["rdmDistance"].max() < 1e-6


def test_sweep_rejects_single_particle(diagonal):
    with pytest.raises(DomainError):
        convergence_sweep(diagonal, [1, 2])


def test_free_problem():
    p = free_problem(3)
    result = hartree_minimize(p)
    assert result.e_H == pytest.approx(0.0, abs=1e-10)
    assert ground_energy(p, 4) == pytest.approx(0.0, abs=1e-12)
    gamma1 = ground_state_rdm1(p, 4)
    assert minimizer_hull_distance(gamma1, result.minimizers, p) < 1e-8


def test_gradients_agree():
    rng = np.random.default_rng(5)
    for seed in range(3):
        p = random_problem(seed, 3)
        u = sample_sphere(rng, 3, 1)[0]
        g = riemannian_gradient(u, p)
        assert abs(np.vdot(u, g).real) < 1e-12
        assert np.max(np.abs(g - finite_difference_gradient(u, p))) < 1e-6


def test_random_problem_minimum_beats_probes():
    p = random_problem(3, 3)
    result = hartree_minimize(p)
    assert result.e_H <= probe_minimum(p) + 1e-10
    assert np.linalg.norm(riemannian_gradient(result.u, p)) < 1e-6


def test_vectorized_energies_match():
    p = random_problem(1, 2)
    points = sample_sphere(np.random.default_rng(2), 2, 6)
    expected = [hartree_energy(u, p) for u in points]
    assert np.allclose(hartree_energies(points, p), expected, atol=1e-12)


def test_start_frame_is_deterministic():
    a = start_frame(3, 12, seed=4)
    b = start_frame(3, 12, seed=4)
    assert np.array_equal(a, b)
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)


def test_fit_inverse_n_recovers_constant():
    N = np.arange(2, 10)
    C, residual = fit_inverse_n(N, 0.3 / N)
    assert C == pytest.approx(0.3)
    assert residual < 1e-12
    assert fit_inverse_n(N, np.zeros(len(N))) == (0.0, 0.0)


def test_problem_json_round_trip(diagonal):
    restored = HartreeProblem.from_json(diagonal.to_json())
    assert np.array_equal(restored.w.entries, diagonal.w.entries)
    assert np.array_equal(restored.h.entries, diagonal.h.entries)
