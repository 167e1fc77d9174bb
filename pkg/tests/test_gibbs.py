import numpy as np
import pytest

from src.exceptions import DomainError
from src.gibbs import (
    berezin_lieb_check,
    classical_free_energy,
    classical_gibbs_symbol,
    classical_monte_carlo,
    classical_quadrature,
    gap_sweep,
    gibbs_optimality_margin,
    lower_bound_chain,
    quantum_free_energy,
    quantum_gibbs,
    shifted_free_energy,
    trial_state_upper_bound,
)
from src.hartree import HartreeProblem, diagonal_problem, free_problem
from src.states import maximally_mixed, random_density
from src.symspace import OneBodyOp, TwoBodyOp, get_sector, sector_dimension

FREE_CLOSED_FORM = -np.log(1 - np.exp(-1))


@pytest.fixture(scope="module")
def free2():
    return free_problem(2)


def test_zero_hamiltonian_free_energy():
    p = HartreeProblem(OneBodyOp(np.zeros((3, 3))), TwoBodyOp.zero(3))
    for N, T in [(2, 0.5), (4, 3.0)]:
        expected = -T * np.log(sector_dimension(3, N))
        assert quantum_free_energy(p, N, T) == pytest.approx(expected, abs=1e-12)
        gamma = quantum_gibbs(p, N, T)
        assert np.allclose(gamma.entries, maximally_mixed(get_sector(3, N)).entries, atol=1e-12)


def test_classical_free_energy_closed_form(free2):
    value, error = classical_quadrature(free2, 1.0)
    assert value == pytest.approx(FREE_CLOSED_FORM, abs=1e-8)
    assert error < 1e-6


def test_monte_carlo_agrees_with_quadrature(free2):
    result = classical_free_energy(free2, 1.0, samples=50_000, seed=3)
    assert result.quadrature is not None
    assert abs(result.monte_carlo - result.quadrature) <= 4 * result.stderr + result.quadrature_error


def test_monte_carlo_only_above_three_modes():
    result = classical_free_energy(free_problem(4), 0.5, samples=20_000)
    assert result.quadrature is None
    assert result.F_cl == result.monte_carlo
    assert result.stderr > 0


@pytest.mark.parametrize("N", [4, 8, 16, 32, 40])
def test_shifted_free_energy_converges(free2, N):
    shifted = shifted_free_energy(free2, N, 1.0)
    assert abs(shifted - FREE_CLOSED_FORM) <= 0.5 / N
    # the shifted quantum value sits below the classical one
    assert shifted <= FREE_CLOSED_FORM + 1e-12


def test_gap_sweep_free_problem(free2):
    result = gap_sweep(free2, 1.0, [4, 8, 16, 32, 40], samples=20_000)
    assert list(result.rows.columns) == ["N", "T", "F_N", "shifted", "F_cl", "mc_err", "gap"]
    assert result.violations == 0
    assert np.all(np.diff(result.rows["gap"].abs()) <= 1e-12)
    assert result.tail_max_gap <= 0.5 / 32
    assert len(result.rdm_distances) == 5
    assert result.rdm_distances[-1] < result.rdm_distances[0]


def test_gap_sweep_is_thread_independent():
    p = diagonal_problem()
    a = gap_sweep(p, 0.5, [2, 3, 4], samples=5_000, seed=1, threads=1)
    b = gap_sweep(p, 0.5, [2, 3, 4], samples=5_000, seed=1, threads=3)
    assert a.rows.equals(b.rows)


def test_trial_state_upper_bound(free2):
    for N in (2, 4, 6):
        report = trial_state_upper_bound(free2, N, 1.0)
        assert report["passed"]
        assert report["slack"] >= -1e-10


def test_lower_bound_chain(free2):
    F_cl, _ = classical_quadrature(free2, 1.0)
    for N in (3, 6):
        report = lower_bound_chain(free2, N, 1.0, F_cl)
        assert report["slack"] >= -1e-8


def test_berezin_lieb_equality_for_maximally_mixed():
    gamma = maximally_mixed(get_sector(2, 4))
    report = berezin_lieb_check(gamma)
    assert report.passed
    assert abs(report.slack) < 1e-8


def test_berezin_lieb_first_inequality_on_random_states():
    for seed in range(4):
        gamma = random_density(seed, get_sector(3, 3), rank=1 + seed)
        report = berezin_lieb_check(gamma)
        assert report.slack >= -1e-6


def test_berezin_lieb_second_inequality(free2):
    N = 4
    symbol = classical_gibbs_symbol(free2, 1.0, 2 * N)
    report = berezin_lieb_check(symbol.state(N), upper=symbol, second=True)
    assert report.passed
    assert report.upper_passed
    assert report.upper_slack >= -1e-9


def test_second_inequality_needs_symbol():
    with pytest.raises(DomainError):
        berezin_lieb_check(maximally_mixed(get_sector(2, 2)), second=True)


def test_gibbs_state_minimizes_free_energy():
    assert gibbs_optimality_margin(diagonal_problem(), 3, 1.5, count=20) >= -1e-10


def test_domain_errors(free2):
    with pytest.raises(DomainError):
        quantum_free_energy(free2, 2, 0.0)
    with pytest.raises(DomainError):
        quantum_gibbs(free2, 2, -1.0)
    with pytest.raises(DomainError):
        classical_monte_carlo(free2, 1.0, 999, 0)
    with pytest.raises(DomainError):
        gap_sweep(free2, 0.0, [2])
