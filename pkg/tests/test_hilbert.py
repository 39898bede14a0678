import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitqnd.errors import CutoffError, DimensionError, InvalidLabelError
from eitqnd.hilbert import (
    ATOM_LEVELS,
    Operator,
    SpaceSpec,
    StateVector,
    annihilator,
    coherent_ket,
    default_cutoff,
    fock_ket,
    identity,
    kron,
    number_op,
    sigma,
)

labels = st.sampled_from(ATOM_LEVELS)
cutoffs = st.integers(min_value=0, max_value=6)


def test_composite_dimension():
    for n_max in range(5):
        assert SpaceSpec(n_max).dim == 3 * (n_max + 1)


def test_sigma_aa_single_level():
    np.testing.assert_array_equal(sigma("a", "a", SpaceSpec(0)).matrix, np.diag([1, 0, 0]))


def test_projector_algebra():
    s = SpaceSpec(2)
    np.testing.assert_array_equal((sigma("e", "a", s) @ sigma("a", "e", s)).matrix, sigma("e", "e", s).matrix)


@given(cutoffs)
def test_off_diagonal_sigma_traceless(n_max):
    assert sigma("a", "b", SpaceSpec(n_max)).trace() == 0


def test_unknown_label():
    with pytest.raises(InvalidLabelError):
        sigma("f", "a", SpaceSpec(1))


@given(labels, labels, cutoffs)
def test_sigma_dagger_swaps_labels(xi, eta, n_max):
    s = SpaceSpec(n_max)
    np.testing.assert_array_equal(sigma(xi, eta, s).dag().matrix, sigma(eta, xi, s).matrix)


def test_annihilator_on_low_fock_states():
    s = SpaceSpec(1)
    a = annihilator(s)
    np.testing.assert_allclose((a @ fock_ket(1, s)).amplitudes, fock_ket(0, s).amplitudes)
    raw = a.matrix @ fock_ket(0, s).amplitudes
    assert np.allclose(raw, 0)


@given(cutoffs)
def test_number_operator_spectrum(n_max):
    s = SpaceSpec(n_max)
    n_op = number_op(s)
    assert n_op.is_hermitian()
    for n in range(n_max + 1):
        psi = fock_ket(n, s, atom="b")
        np.testing.assert_allclose((n_op @ psi).amplitudes, n * psi.amplitudes)
    np.testing.assert_allclose(np.linalg.eigvalsh(n_op.matrix), np.repeat(np.arange(n_max + 1), 3))


@given(st.integers(min_value=1, max_value=6))
def test_commutator_truncation(n_max):
    s = SpaceSpec(n_max)
    a = annihilator(s).matrix
    comm = a @ a.conj().T - a.conj().T @ a
    diag = comm.reshape(3, s.n_fock, 3, s.n_fock)[0, :, 0, :]
    np.testing.assert_allclose(diag[:-1, :-1], np.eye(n_max))
    assert diag[-1, -1] == pytest.approx(-n_max)


def test_kron_identity_and_trace():
    s = SpaceSpec(3)
    np.testing.assert_array_equal(kron(np.eye(3), np.eye(4)), identity(s).matrix)
    A = np.arange(9).reshape(3, 3) + 1j
    B = np.arange(16).reshape(4, 4) * 0.5
    assert np.trace(kron(A, B)) == pytest.approx(np.trace(A) * np.trace(B))


@given(st.integers(0, 2**31 - 1))
def test_kron_mixed_product_and_associativity(seed):
    r = np.random.default_rng(seed)
    A, C = (r.normal(size=(3, 3)) + 1j * r.normal(size=(3, 3)) for _ in range(2))
    B, D = (r.normal(size=(2, 2)) + 1j * r.normal(size=(2, 2)) for _ in range(2))
    E = r.normal(size=(2, 2))
    np.testing.assert_allclose(kron(A, B) @ kron(C, D), kron(A @ C, B @ D), atol=1e-12)
    np.testing.assert_allclose(kron(kron(A, B), E), kron(A, kron(B, E)), atol=1e-12)


def test_kron_dimension_mismatch():
    with pytest.raises(DimensionError):
        kron(np.eye(3), np.eye(2), space=SpaceSpec(3))


def test_operator_shape_checked():
    with pytest.raises(DimensionError):
        Operator(SpaceSpec(1), np.eye(5))


@given(labels, labels, cutoffs)
def test_double_dagger_identity(xi, eta, n_max):
    op = sigma(xi, eta, SpaceSpec(n_max)) * (0.3 + 0.7j)
    np.testing.assert_array_equal(op.dag().dag().matrix, op.matrix)


def test_coherent_zero_is_vacuum():
    s = SpaceSpec(4)
    np.testing.assert_allclose(coherent_ket(0, s).amplitudes, fock_ket(0, s).amplitudes)


def test_coherent_single_photon_probability():
    s = SpaceSpec(30)
    psi = coherent_ket(1.0, s)
    assert abs(psi.amplitudes[s.index("a", 1)]) ** 2 == pytest.approx(math.exp(-1), abs=1e-12)


@given(st.complex_numbers(max_magnitude=2.0))
def test_coherent_mean_photon_number(alpha):
    s = SpaceSpec(default_cutoff(alpha=alpha))
    psi = coherent_ket(alpha, s)
    assert psi.expect(number_op(s)).real == pytest.approx(abs(alpha) ** 2, abs=1e-4)
    assert psi.norm() == pytest.approx(1.0)


def test_coherent_cutoff_too_small():
    with pytest.raises(CutoffError):
        coherent_ket(2.0, SpaceSpec(2))


def test_fock_beyond_cutoff():
    with pytest.raises(CutoffError):
        fock_ket(3, SpaceSpec(2))


def test_default_cutoff():
    assert default_cutoff(4) == 4
    assert default_cutoff(0, 1.0) == 10


def test_state_vector_normalized():
    psi = StateVector(SpaceSpec(0), [1, 1, 0])
    assert psi.norm() == pytest.approx(1.0)
