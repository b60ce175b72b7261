import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralwalk.exceptions import NotHermitian
from chiralwalk.model import ModelParams, build_hamiltonian
from chiralwalk.smallalg import (general_eigendecompose, hermitian_eigendecompose, is_hermitian,
                                 unitarity_defect, unitary_from_hamiltonian)
from chiralwalk.spectra import gtar_matrix, onsite_survival_operator

from .oracles import cardano_roots, ring_hamiltonian, taylor_expm


def multiset_distance(a, b):
    a, b = list(np.asarray(a, complex)), list(np.asarray(b, complex))
    worst = 0.0
    for x in a:
        j = min(range(len(b)), key=lambda i: abs(b[i] - x))
        worst = max(worst, abs(b.pop(j) - x))
    return worst


def random_hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (A + A.conj().T) / 2


def test_identity_eigensystem():
    eig = hermitian_eigendecompose(np.eye(3))
    np.testing.assert_allclose(eig.eigenvalues, [1, 1, 1])
    assert np.all(eig.residuals == 0)


def test_triangle_spectrum_zero_flux():
    eig = hermitian_eigendecompose(build_hamiltonian(ModelParams(alpha=0.0)))
    np.testing.assert_allclose(eig.eigenvalues, [-2, 1, 1], atol=1e-12)


def test_triangle_spectrum_finite_flux():
    expected = sorted(-2 * math.cos(2 * math.pi * k / 3 + 0.5) for k in range(3))
    eig = hermitian_eigendecompose(build_hamiltonian(ModelParams(alpha=0.5)))
    np.testing.assert_allclose(eig.eigenvalues, expected, atol=1e-12)


def test_not_hermitian_raises():
    with pytest.raises(NotHermitian):
        hermitian_eigendecompose(np.array([[0, 1], [0, 0]]))


def test_dimension_cap():
    with pytest.raises(ValueError):
        hermitian_eigendecompose(np.eye(17))


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16])
def test_hermitian_reconstruction_and_orthonormality(d):
    rng = np.random.default_rng(d)
    A = random_hermitian(rng, d)
    eig = hermitian_eigendecompose(A)
    scale = np.linalg.norm(A)
    V, E = eig.right, eig.eigenvalues
    assert np.all(np.diff(E) >= 0)
    gram = V.conj().T @ V
    assert np.abs(gram - np.eye(d)).max() <= 1e-10
    np.testing.assert_allclose((V * E) @ V.conj().T, A, atol=1e-10 * scale)
    assert eig.residuals_within(A)


def test_general_diagonal():
    eig = general_eigendecompose(np.diag([1, 2j, -3]))
    assert multiset_distance(eig.eigenvalues, [1, 2j, -3]) < 1e-14


@pytest.mark.parametrize("seed", range(5))
def test_general_against_cardano(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    eig = general_eigendecompose(A, left=True)
    assert multiset_distance(eig.eigenvalues, cardano_roots(A)) < 1e-10
    assert eig.residuals_within(A)
    np.testing.assert_allclose(np.linalg.norm(eig.right, axis=0), 1.0)
    np.testing.assert_allclose(np.linalg.norm(eig.left, axis=0), 1.0)
    L = eig.left
    for k, lam in enumerate(eig.eigenvalues):
        assert np.linalg.norm(L[:, k].conj() @ A - lam * L[:, k].conj()) < 1e-10 * np.linalg.norm(A)


@pytest.mark.parametrize("d", [3, 6, 12])
def test_general_trace_and_determinant(d):
    rng = np.random.default_rng(100 + d)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    lam = general_eigendecompose(A).eigenvalues
    tr, det = np.trace(A), np.linalg.det(A)
    assert abs(lam.sum() - tr) <= 1e-10 * max(1, abs(tr))
    assert abs(np.prod(lam) - det) <= 1e-9 * abs(det)


def test_gtar_special_point_has_unit_eigenvalue():
    p = ModelParams.from_gtau(2 * math.pi / math.sqrt(3), math.pi / 6)
    eig = general_eigendecompose(gtar_matrix(p))
    assert np.isclose(np.abs(eig.eigenvalues).max(), 1.0, atol=1e-10)
    assert multiset_distance(eig.eigenvalues, cardano_roots(gtar_matrix(p))) < 1e-8


def test_survival_operator_near_unit_eigenvalue():
    p = ModelParams.from_gtau(3.62, 0.5)
    eig = general_eigendecompose(onsite_survival_operator(p))
    assert np.abs(eig.eigenvalues).max() >= 0.999


def test_defective_flag_on_jordan_block():
    eig = general_eigendecompose(np.array([[1.0, 1.0], [0.0, 1.0]]), left=True)
    assert eig.defective


def test_unitary_zero_time_is_identity():
    H = build_hamiltonian(ModelParams(alpha=0.3))
    np.testing.assert_allclose(unitary_from_hamiltonian(H, 0.0), np.eye(3), atol=1e-14)


def test_unitary_revival_is_scalar():
    U = unitary_from_hamiltonian(build_hamiltonian(ModelParams()), 2 * math.pi / 3)
    phase = U[0, 0]
    assert abs(abs(phase) - 1) < 1e-12
    np.testing.assert_allclose(U, phase * np.eye(3), atol=1e-12)


def test_unitary_matches_taylor_oracle():
    H = ring_hamiltonian(1.0, 0.5)
    U = unitary_from_hamiltonian(H, 1.0)
    np.testing.assert_allclose(U, taylor_expm(-1j * H), atol=1e-9)
    assert unitarity_defect(U) <= 1e-10


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        unitary_from_hamiltonian(np.eye(2), -1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.floats(0, 20), st.integers(0, 2 ** 32 - 1))
def test_unitary_preserves_norm(d, tau, seed):
    rng = np.random.default_rng(seed)
    U = unitary_from_hamiltonian(random_hermitian(rng, d), tau)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    assert abs(np.linalg.norm(U @ psi) - 1.0) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=10), st.integers(0, 2 ** 32 - 1))
def test_hermitian_eigenvalues_real_and_reconstruct(d, seed):
    A = random_hermitian(np.random.default_rng(seed), d)
    assert is_hermitian(A)
    eig = hermitian_eigendecompose(A)
    assert eig.eigenvalues.dtype.kind == "f"
    V = eig.right
    np.testing.assert_allclose((V * eig.eigenvalues) @ V.conj().T, A, atol=1e-10 * max(np.linalg.norm(A), 1))
