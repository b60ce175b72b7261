"""Dense complex linear algebra for the small matrices used in this package.

All routines accept square ``numpy`` arrays of dimension at most 16 and
return fresh arrays; nothing is modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._constants import TOL
from .exceptions import NoConvergence, NotHermitian

MAX_DIM = 16


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues with unit-norm right (and optionally left) eigenvectors.

    Vectors are stored column-wise: ``right[:, k]`` pairs with
    ``eigenvalues[k]``.  Left vectors satisfy ``left[:, k].conj() @ A ==
    eigenvalues[k] * left[:, k].conj()``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    defective: bool = False

    @property
    def biorthogonality(self) -> Optional[np.ndarray]:
        """``|<L_k|R_k>|`` per eigenpair, or None without left vectors."""
        if self.left is None:
            return None
        return np.abs(np.einsum("ik,ik->k", self.left.conj(), self.right))

    def residuals_within(self, matrix: np.ndarray, rtol: float = TOL.eig_residual) -> bool:
        bound = rtol * max(np.linalg.norm(matrix), 1.0)
        return bool(np.all(self.residuals <= bound))


def as_square(A, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"{name} has dimension {A.shape[0]} > {MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def is_hermitian(A: np.ndarray, rtol: float = TOL.hermitian) -> bool:
    A = np.asarray(A)
    scale = np.abs(A).max(initial=0.0)
    return bool(np.abs(A - A.conj().T).max(initial=0.0) <= rtol * max(scale, np.finfo(float).tiny))


def check_hermitian(A, rtol: float = TOL.hermitian) -> np.ndarray:
    A = as_square(A)
    if not is_hermitian(A, rtol):
        dev = np.abs(A - A.conj().T).max()
        raise NotHermitian(f"matrix deviates from its adjoint by {dev:.3e}")
    return A


def _right_residuals(A, values, vectors):
    return np.linalg.norm(A @ vectors - vectors * values, axis=0)


def hermitian_eigendecompose(A) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are real and ascending; eigenvectors are orthonormal.

    Raises
    ------
    NotHermitian
        If ``A`` is not Hermitian to within ``TOL.hermitian``.
    NoConvergence
        If the LAPACK driver fails to converge.
    """
    A = check_hermitian(A)
    try:
        values, vectors = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    values = np.asarray(values, dtype=float)
    return EigenSystem(
        eigenvalues=values,
        right=vectors,
        residuals=_right_residuals(A, values, vectors),
    )


def _normalize_columns(V: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0] = 1.0
    return V / norms


def general_eigendecompose(A, left: bool = False) -> EigenSystem:
    """Eigendecomposition of a general (possibly non-normal) square matrix.

    Eigenpairs are ordered by decreasing modulus, ties broken by real then
    imaginary part.  With ``left=True`` the left eigenvectors are returned
    as well and ``defective`` is set when some pair has
    ``|<L_k|R_k>| < TOL.biorthogonality``; the decomposition is still
    returned so callers can decide what to do.
    """
    A = as_square(A)
    try:
        if left:
            values, vl, vr = scipy.linalg.eig(A, left=True, right=True)
        else:
            values, vr = scipy.linalg.eig(A, left=False, right=True)
            vl = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoConvergence(str(exc)) from exc

    order = np.lexsort((np.round(values.imag, 12), np.round(values.real, 12), -np.round(np.abs(values), 12)))
    values = values[order]
    vr = _normalize_columns(vr[:, order])
    residuals = _right_residuals(A, values, vr)
    defective = False
    if vl is not None:
        vl = _normalize_columns(vl[:, order])
        left_res = np.linalg.norm(vl.conj().T @ A - values[:, None] * vl.conj().T, axis=1)
        residuals = np.maximum(residuals, left_res)
        overlaps = np.abs(np.einsum("ik,ik->k", vl.conj(), vr))
        defective = bool(np.any(overlaps < TOL.biorthogonality))
    return EigenSystem(eigenvalues=values, right=vr, left=vl, residuals=residuals, defective=defective)


def unitary_from_hamiltonian(H, tau: float) -> np.ndarray:
    """``exp(-i H tau)`` built from the spectral decomposition of ``H``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    eig = hermitian_eigendecompose(H)
    V = eig.right
    return (V * np.exp(-1j * eig.eigenvalues * tau)) @ V.conj().T


def unitarity_defect(U) -> float:
    U = np.asarray(U)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])))
