import numpy as np
import pytest

from src.exceptions import DomainError
from src.states import (
    DensityOp,
    energy_from_rdms,
    maximally_mixed,
    partial_trace,
    pure_state,
    random_density,
    reduce_operator,
    trace_norm_distance,
    wick_diagonal,
    x_log_x_trace,
)
from src.symspace import assemble_hamiltonian, get_sector, product_embed, random_problem_operators
from src.tensor_oracle import oracle_partial_trace


def test_random_density_is_valid_and_reproducible():
    sector = get_sector(3, 3)
    a = random_density(4, sector, rank=3)
    b = random_density(4, sector, rank=3)
    assert np.array_equal(a.entries, b.entries)
    assert abs(np.trace(a.entries).real - 1.0) < 1e-12
    assert a.eigenvalues[0] > -1e-12
    assert np.sum(a.eigenvalues > 1e-12) == 3


def test_random_density_rank_bounds():
    with pytest.raises(DomainError):
        random_density(0, get_sector(2, 1), rank=3)


def test_partial_trace_matches_tensor_oracle():
    for d, N in [(2, 3), (2, 5), (3, 3), (3, 4)]:
        gamma = random_density(N + 10 * d, get_sector(d, N), rank=2)
        for n in range(N + 1):
            fast = reduce_operator(gamma.entries, d, N, n)
            slow = oracle_partial_trace(gamma.entries, d, N, n)
            assert trace_norm_distance(fast, slow) < 1e-10


def test_partial_trace_is_trace_preserving_and_composes():
    gamma = random_density(2, get_sector(3, 4), rank=5)
    gamma2 = partial_trace(gamma, 2)
    assert abs(np.trace(gamma2.entries).real - 1.0) < 1e-12
    direct = partial_trace(gamma, 1)
    composed = partial_trace(gamma2, 1)
    assert trace_norm_distance(direct, composed) < 1e-12


def test_partial_trace_of_product_state():
    u = np.array([0.6, 0.8j])
    gamma = pure_state(product_embed(u, 4))
    gamma1 = partial_trace(gamma, 1)
    assert np.allclose(gamma1.entries, np.outer(u, u.conj()), atol=1e-12)


def test_partial_trace_rejects_large_order():
    gamma = maximally_mixed(get_sector(2, 2))
    with pytest.raises(DomainError):
        partial_trace(gamma, 3)


def test_trace_norm_distance_properties():
    a = pure_state(product_embed(np.array([1.0, 0.0]), 1))
    b = pure_state(product_embed(np.array([0.0, 1.0]), 1))
    assert trace_norm_distance(a, b) == pytest.approx(2.0)
    assert trace_norm_distance(a, a) == 0.0
    with pytest.raises(DomainError):
        trace_norm_distance(a, maximally_mixed(get_sector(2, 2)))


def test_wick_diagonal_equals_rdm_diagonal():
    rng = np.random.default_rng(8)
    gamma = random_density(1, get_sector(3, 4), rank=3)
    for n in range(1, 5):
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        v /= np.linalg.norm(v)
        vn = product_embed(v, n).amplitudes
        expected = np.vdot(vn, reduce_operator(gamma.entries, 3, 4, n) @ vn).real
        assert wick_diagonal(gamma, v, n) == pytest.approx(expected, abs=1e-12)


def test_energy_from_rdms_matches_hamiltonian():
    h, w = random_problem_operators(3, 2)
    gamma = random_density(9, get_sector(2, 5), rank=2)
    H = assemble_hamiltonian(h, w, 5)
    assert energy_from_rdms(h, w, gamma) == pytest.approx(np.trace(H @ gamma.entries).real / 5, abs=1e-12)


def test_entropy_of_maximally_mixed():
    gamma = maximally_mixed(get_sector(2, 3))
    assert gamma.entropy() == pytest.approx(np.log(4))
    assert x_log_x_trace(np.array([0.0, 1.0])) == 0.0


def test_density_validation():
    with pytest.raises(DomainError):
        DensityOp(get_sector(2, 1), np.diag([1.5, -0.5]))
    with pytest.raises(DomainError):
        DensityOp(get_sector(2, 1), np.eye(3) / 3)


def test_json_and_spectrum_frame():
    gamma = random_density(5, get_sector(2, 2), rank=2)
    restored = DensityOp.from_json(gamma.to_json())
    assert np.array_equal(restored.entries, gamma.entries)
    frame = gamma.spectrum_frame()
    assert list(frame.columns) == ["index", "eigenvalue"]
    assert len(frame) == 3
