import numpy as np
import pytest
from scipy.stats import unitary_group

from src.exceptions import DomainError
from src.localization import (
    Projector,
    binomial_mass_residual,
    block_masses,
    block_rdm,
    check_consistency,
    check_duality,
    covariance_residual,
    localization_uniqueness_check,
    localize,
    random_projector,
    tensor_power_map,
)
from src.states import DensityOp, maximally_mixed, random_density, trace_norm_distance
from src.symspace import get_sector, product_embed
from src.tensor_oracle import embed_state, oracle_localized_block

CASES = [(d, N) for d in (2, 3) for N in range(1, 5)]


@pytest.fixture
def one_in_each_mode():
    sector = get_sector(2, 2)
    amplitudes = np.zeros(sector.dimension, dtype=complex)
    amplitudes[sector.index((1, 1))] = 1.0
    return DensityOp(sector, np.outer(amplitudes, amplitudes.conj()))


def test_two_body_fixture_blocks(one_in_each_mode):
    blocks = localize(one_in_each_mode, Projector.onto(np.array([[1.0], [0.0]])))
    assert np.allclose(blocks.traces(), [0.0, 1.0, 0.0], atol=1e-14)
    assert np.allclose(blocks.blocks[1], [[1.0]])
    assert np.allclose(blocks.embedded(1), [[1.0, 0.0], [0.0, 0.0]])


@pytest.mark.parametrize("d,N", CASES)
def test_duality_and_consistency(d, N):
    for seed in range(4):
        gamma = random_density(seed, get_sector(d, N), rank=1 + seed % 3)
        P = random_projector(10 * seed + d, d)
        assert check_duality(gamma, P) < 1e-12
        for n in range(N + 1):
            assert check_consistency(gamma, P, n) < 1e-10


@pytest.mark.parametrize("d,N", [(2, 2), (2, 3), (3, 2)])
def test_blocks_match_tensor_oracle(d, N):
    gamma = random_density(4, get_sector(d, N), rank=2)
    P = random_projector(7, d, rank=1)
    blocks = localize(gamma, P)
    for k in range(1, N + 1):
        expected = oracle_localized_block(gamma.entries, P.matrix, d, N, k)
        assert np.max(np.abs(embed_state(blocks.embedded(k), d, k) - expected)) < 1e-10


def test_trivial_projectors():
    gamma = random_density(3, get_sector(3, 3), rank=2)
    empty = localize(gamma, Projector(np.zeros((3, 3))))
    assert np.allclose(empty.traces(), [1.0, 0.0, 0.0, 0.0])
    full = localize(gamma, Projector(np.eye(3)))
    assert np.allclose(full.traces(), [0.0, 0.0, 0.0, 1.0])
    assert trace_norm_distance(full.embedded(3), gamma.entries) < 1e-12


def test_product_state_masses_are_binomial():
    rng = np.random.default_rng(11)
    for d, N in [(2, 4), (3, 3)]:
        u = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        u /= np.linalg.norm(u)
        P = random_projector(d + N, d, rank=1)
        assert binomial_mass_residual(u, P, N) < 1e-12


def test_maximally_mixed_masses_sum_to_one():
    masses = block_masses(maximally_mixed(get_sector(3, 4)), random_projector(2, 3, rank=2))
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(masses >= -1e-14)


def test_tensor_power_map():
    u = np.array([0.6, 0.8j])
    column = tensor_power_map(u[:, None], 3)[:, 0]
    assert np.allclose(column, product_embed(u, 3).amplitudes)
    U = unitary_group.rvs(3, random_state=1)
    lifted = tensor_power_map(U, 3)
    assert np.allclose(lifted @ lifted.conj().T, np.eye(lifted.shape[0]), atol=1e-12)


def test_covariance_under_commuting_unitary():
    P = Projector(np.diag([1.0, 0.0, 0.0]))
    U = np.zeros((3, 3), dtype=complex)
    U[0, 0] = np.exp(0.3j)
    U[1:, 1:] = unitary_group.rvs(2, random_state=5)
    gamma = random_density(6, get_sector(3, 3), rank=3)
    assert covariance_residual(gamma, P, U) < 1e-10
    with pytest.raises(DomainError):
        covariance_residual(gamma, P, unitary_group.rvs(3, random_state=2))


def test_localized_rdms_determine_blocks():
    for seed in range(3):
        gamma = random_density(seed, get_sector(2, 3), rank=2)
        P = random_projector(seed, 2, rank=1)
        assert localization_uniqueness_check(gamma, P) < 1e-10


def test_block_rdm_order_check(one_in_each_mode):
    blocks = localize(one_in_each_mode, Projector(np.eye(2)))
    with pytest.raises(DomainError):
        block_rdm(blocks, 3)


def test_random_projector():
    P = random_projector(3, 4, rank=2)
    assert P.rank == 2
    assert np.array_equal(P.matrix, random_projector(3, 4, rank=2).matrix)
    assert P.complement().rank == 2
    assert 0 <= random_projector(8, 3).rank <= 3
    with pytest.raises(DomainError):
        random_projector(0, 2, rank=3)


def test_projector_validation():
    with pytest.raises(DomainError):
        Projector(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        localize(random_density(0, get_sector(2, 2), rank=1), Projector(np.eye(3)))
