import numpy as np
import pytest

from src.exceptions import DomainError
from src.qdefinetti import (
    CKMRReconstructor,
    ChiribellaFormula,
    LowerSymbol,
    MixingMeasure,
    MomentOracle,
    QuadratureMixing,
    anti_wick_diagonal,
    ckmr_mixing,
    ckmr_rdm,
    definetti_gap,
    injectivity_residual,
    lower_symbol_value,
    moment_oracle_rdm,
    normal_order_coeffs,
    normal_order_residual,
    probe_directions,
    product_state_distance,
    schur_resolution,
    upper_symbol_demo,
    sym_pad,
)
from src.states import maximally_mixed, partial_trace, pure_state, random_density, trace_norm_distance
from src.symspace import get_sector, product_embed
from src.tensor_oracle import oracle_sym_pad

GRID = [(d, N) for d in (2, 3) for N in range(1, 6)]


def test_worked_instance_distance_is_two_thirds():
    gamma = pure_state(product_embed(np.array([1.0, 0.0]), 1))
    gap = definetti_gap(gamma, 1)
    assert gap.distance == pytest.approx(2 / 3, abs=1e-10)
    assert gap.bound_4_1 == pytest.approx(2 * (2 + 2) / 1)
    assert not gap.violated


@pytest.mark.parametrize("d,N", GRID)
def test_chiribella_matches_moment_oracle(d, N):
    for seed in range(3):
        gamma = random_density(seed, get_sector(d, N), rank=1 + seed)
        for n in range(1, min(3, N) + 1):
            assert trace_norm_distance(ckmr_rdm(gamma, n), moment_oracle_rdm(gamma, n)) < 1e-10


def test_quadrature_mixing_is_a_third_path():
    gamma = random_density(6, get_sector(3, 3), rank=2)
    reconstructor = CKMRReconstructor(ChiribellaFormula())
    reference = reconstructor.reconstruct(gamma, 2)
    reconstructor.set_strategy(QuadratureMixing())
    assert trace_norm_distance(reconstructor.reconstruct(gamma, 2), reference) < 1e-10
    reconstructor.set_strategy(MomentOracle())
    assert trace_norm_distance(reconstructor.reconstruct(gamma, 2), reference) < 1e-10


@pytest.mark.parametrize("d,N", GRID)
def test_bound_never_violated(d, N):
    for seed in range(5):
        gamma = random_density(100 + seed, get_sector(d, N), rank=1)
        for n in range(1, min(3, N) + 1):
            gap = definetti_gap(gamma, n)
            assert gap.distance <= gap.bound_4_1 + 1e-10
            assert gap.bound_sharp == pytest.approx(2 * n * d / N)


def test_product_state_closed_form():
    for d, N, n in [(2, 3, 1), (2, 4, 2), (3, 5, 3)]:
        u = np.ones(d) / np.sqrt(d)
        gamma = pure_state(product_embed(u, N))
        assert definetti_gap(gamma, n).distance == pytest.approx(product_state_distance(d, N, n), abs=1e-10)


def test_order_above_N_is_rejected():
    with pytest.raises(DomainError):
        definetti_gap(maximally_mixed(get_sector(2, 2)), 3)


def test_ckmr_of_maximally_mixed_is_maximally_mixed():
    gamma = maximally_mixed(get_sector(3, 4))
    reduced = partial_trace(gamma, 2)
    assert trace_norm_distance(ckmr_rdm(gamma, 2), reduced) < 1e-12


def test_lower_symbol_integrates_to_one():
    gamma = random_density(3, get_sector(3, 3), rank=2)
    assert LowerSymbol(gamma).sphere_average() == pytest.approx(1.0, abs=1e-12)
    u = np.array([1.0, 0.0, 0.0])
    assert lower_symbol_value(gamma, u) >= 0.0
    assert LowerSymbol(gamma).values(u[None, :])[0] == pytest.approx(lower_symbol_value(gamma, u))


def test_schur_resolution_is_identity():
    for d, N in [(2, 4), (3, 3)]:
        dim = get_sector(d, N).dimension
        assert np.max(np.abs(schur_resolution(d, N) - np.eye(dim))) < 1e-12


def test_lower_symbol_is_injective():
    gamma = random_density(12, get_sector(2, 3), rank=3)
    assert injectivity_residual(gamma.entries, 2, 3) < 1e-8


def test_sym_pad_matches_tensor_oracle():
    gamma = random_density(2, get_sector(2, 1), rank=2)
    padded = sym_pad(gamma, 3)
    assert np.max(np.abs(padded - oracle_sym_pad(gamma.entries, 2, 1, 3))) < 1e-12


def test_anti_wick_diagonal_matches_ckmr_diagonal():
    rng = np.random.default_rng(4)
    gamma = random_density(21, get_sector(3, 3), rank=2)
    for n in (1, 2, 3):
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        v /= np.linalg.norm(v)
        vn = product_embed(v, n).amplitudes
        expected = np.vdot(vn, ckmr_rdm(gamma, n).entries @ vn).real
        assert anti_wick_diagonal(gamma, v, n) == pytest.approx(expected, abs=1e-10)


def test_normal_ordering():
    assert normal_order_coeffs(1).coeffs == [1, 1]
    assert normal_order_coeffs(2).coeffs == [2, 4, 1]
    for n in (1, 2, 3):
        assert normal_order_residual(n) < 1e-12


def test_mixing_measure_state_and_ckmr_mixing():
    measure = MixingMeasure(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.25, 0.75]))
    state = measure.state(2)
    assert np.allclose(np.diag(state.entries).real, [0.25, 0.0, 0.75])
    gamma = random_density(8, get_sector(2, 4), rank=2)
    assert trace_norm_distance(ckmr_mixing(gamma, degree=6).rdm(2), ckmr_rdm(gamma, 2)) < 1e-10
    with pytest.raises(DomainError):
        MixingMeasure(np.array([[2.0, 0.0]]), np.array([1.0]))


def test_upper_symbol_demo_reports():
    gamma = random_density(9, get_sector(2, 2), rank=2)
    report = upper_symbol_demo(ckmr_mixing(gamma), 6)
    assert report["N"] == 6
    assert report["points"] > 1
    assert report["lower_mean"] > 0
    assert -1.0 <= report["correlation"] <= 1.0 + 1e-12


def test_symbol_sampling_directions_are_seeded_unit_vectors():
    probes = probe_directions(3, 36)
    assert probes.shape == (36, 3)
    assert np.allclose(np.linalg.norm(probes, axis=1), 1.0, atol=1e-14)
    assert np.array_equal(probes, probe_directions(3, 36))
    assert not np.allclose(probes, probe_directions(3, 36, seed=8))
