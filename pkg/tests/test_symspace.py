import itertools

import numpy as np
import pytest

from src.exceptions import CapacityError, DomainError
from src.symspace import (
    Ket,
    OneBodyOp,
    TwoBodyOp,
    annihilator,
    annihilator_power,
    assemble_hamiltonian,
    ccr_residual,
    creator,
    get_sector,
    operator_from_json,
    operator_to_json,
    product_embed,
    product_embed_many,
    random_problem_operators,
    sector_dimension,
    symmetric_isometry,
)
from src.tensor_oracle import oracle_hamiltonian, tensor_power


def test_sector_dimension_values():
    assert sector_dimension(2, 2) == 3
    assert sector_dimension(3, 4) == 15
    assert sector_dimension(4, 0) == 1
    assert sector_dimension(1, 7) == 1


def test_sector_dimension_cap():
    with pytest.raises(CapacityError):
        sector_dimension(30, 30)
    with pytest.raises(DomainError):
        sector_dimension(-1, 2)


def test_basis_order_is_lex_descending():
    assert get_sector(2, 2).basis == ((2, 0), (1, 1), (0, 2))
    basis = get_sector(3, 3).basis
    assert list(basis) == sorted(basis, reverse=True)
    for i, occupation in enumerate(basis):
        assert get_sector(3, 3).index(occupation) == i


def test_product_embed_normalized_and_matches_tensor_power():
    rng = np.random.default_rng(3)
    for d, N in [(2, 3), (3, 2), (3, 4)]:
        u = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        u /= np.linalg.norm(u)
        ket = product_embed(u, N)
        assert ket.is_normalized()
        V = symmetric_isometry(get_sector(d, N))
        full = tensor_power(u[:, None], N)[:, 0]
        assert np.max(np.abs(V @ ket.amplitudes - full)) < 1e-12


def test_product_embed_of_basis_vector():
    ket = product_embed(np.array([0.0, 1.0, 0.0]), 3)
    expected = np.zeros(get_sector(3, 3).dimension)
    expected[get_sector(3, 3).index((0, 3, 0))] = 1.0
    assert np.allclose(ket.amplitudes, expected, atol=1e-14)


def test_product_embed_rejects_unnormalized():
    with pytest.raises(DomainError):
        product_embed(np.array([1.0, 1.0]), 2)


def test_product_embed_many_agrees_with_single():
    rng = np.random.default_rng(0)
    points = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    many = product_embed_many(points, 3)
    for q in range(5):
        assert np.max(np.abs(many[q] - product_embed(points[q], 3).amplitudes)) < 1e-12


def test_canonical_commutation_relations():
    rng = np.random.default_rng(1)
    for d, N in itertools.product([2, 3], [0, 1, 2, 3]):
        f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        assert ccr_residual(f, g, get_sector(d, N)) < 1e-12


def test_annihilator_is_antilinear_and_creator_adjoint():
    sector = get_sector(2, 3)
    f = np.array([1.0, 1j]) / np.sqrt(2)
    assert np.allclose(annihilator(1j * f, sector), -1j * annihilator(f, sector))
    assert np.allclose(creator(f, sector), annihilator(f, sector).conj().T)


def test_annihilator_on_product_state():
    # a(f) u^N = sqrt(N) <f, u> u^(N-1)
    u = np.array([0.6, 0.8j])
    f = np.array([1.0, 0.0])
    lowered = annihilator(f, get_sector(2, 4)) @ product_embed(u, 4).amplitudes
    expected = np.sqrt(4) * np.vdot(f, u) * product_embed(u, 3).amplitudes
    assert np.max(np.abs(lowered - expected)) < 1e-12


def test_annihilator_power_bounds():
    with pytest.raises(DomainError):
        annihilator_power(np.array([1.0, 0.0]), get_sector(2, 1), 2)


def test_hamiltonian_matches_tensor_oracle():
    for d, N in [(2, 2), (2, 4), (3, 3)]:
        h, w = random_problem_operators(11, d)
        H = assemble_hamiltonian(h, w, N)
        assert np.max(np.abs(H - H.conj().T)) < 1e-12
        assert np.max(np.abs(H - oracle_hamiltonian(h, w, N))) < 1e-10


def test_hamiltonian_diagonal_example():
    w_full = np.zeros((4, 4))
    w_full[0, 0] = 2.0
    h = OneBodyOp(np.diag([0.0, 1.0]))
    w = TwoBodyOp.from_tensor(2, w_full)
    H = assemble_hamiltonian(h, w, 3)
    # |3,0>: lam * 3 pairs * 2 = 3 ; |2,1>: 1 + 2/2 = 2 ; |1,2>: 2 ; |0,3>: 3
    assert np.allclose(np.diag(H).real, [3.0, 2.0, 2.0, 3.0])
    assert np.min(np.linalg.eigvalsh(H)) == pytest.approx(2.0, abs=1e-12)


def test_hamiltonian_single_particle_is_h():
    h, w = random_problem_operators(5, 3)
    assert np.allclose(assemble_hamiltonian(h, w, 1), h.entries)


def test_operator_json_round_trip():
    sector = get_sector(2, 2)
    matrix = np.arange(9).reshape(3, 3) + 1j * np.eye(3)
    restored_sector, restored = operator_from_json(operator_to_json(sector, matrix))
    assert restored_sector == sector
    assert np.array_equal(restored, matrix)
    ket = product_embed(np.array([0.6, 0.8]), 2)
    assert np.array_equal(Ket.from_json(ket.to_json()).amplitudes, ket.amplitudes)


def test_one_body_must_be_hermitian():
    with pytest.raises(DomainError):
        OneBodyOp(np.array([[0.0, 1.0], [0.0, 0.0]]))
