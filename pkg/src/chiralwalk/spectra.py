"""Spectral diagnostics of the survival operators.

* on-site:   ``S = (I - |tar><tar|) U``, sub-unitary
* tracking:  ``G_tar = G (I - |tar><tar|)``, sub-stochastic

An eigenvalue of modulus one means some amplitude (or probability) never
reaches the target; eigenvalues close to one produce the slow decay of the
null-measurement probability near special sampling times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._constants import TOL
from .detection import DetectionSetup, FirstDetectionDistribution, Protocol, first_detection, stochastic_matrix
from .exceptions import DefectiveDecomposition
from .model import ModelParams, unitary
from .smallalg import EigenSystem, general_eigendecompose


@dataclass(frozen=True, eq=False)
class SurvivalSpectrum:
    params: ModelParams
    protocol: Protocol
    eigenvalues: np.ndarray
    max_abs: float
    left_right_overlaps: np.ndarray
    target_overlaps: np.ndarray
    defective: bool
    system: EigenSystem = field(repr=False)


def _complement_projector(dim: int, target: int) -> np.ndarray:
    Q = np.eye(dim)
    Q[target, target] = 0.0
    return Q


def onsite_survival_operator(params: ModelParams, target: int = 0) -> np.ndarray:
    return _complement_projector(params.dim, target) @ unitary(params)


def gtar_matrix(params: ModelParams, target: int = 0) -> np.ndarray:
    return stochastic_matrix(params) @ _complement_projector(params.dim, target)


def _spectrum(matrix, params, protocol, target) -> SurvivalSpectrum:
    eig = general_eigendecompose(matrix, left=True)
    return SurvivalSpectrum(
        params=params,
        protocol=protocol,
        eigenvalues=eig.eigenvalues,
        max_abs=float(np.abs(eig.eigenvalues).max()),
        left_right_overlaps=eig.biorthogonality,
        target_overlaps=np.abs(eig.right[target]),
        defective=eig.defective,
        system=eig,
    )


def survival_spectrum_onsite(params: ModelParams, target: int = 0) -> SurvivalSpectrum:
    return _spectrum(onsite_survival_operator(params, target), params, Protocol.ONSITE, target)


def gtar_spectrum(params: ModelParams, target: int = 0) -> SurvivalSpectrum:
    return _spectrum(gtar_matrix(params, target), params, Protocol.TRACKING, target)


def survival_spectrum(params: ModelParams, protocol=Protocol.ONSITE, target: int = 0) -> SurvivalSpectrum:
    if Protocol.parse(protocol) is Protocol.ONSITE:
        return survival_spectrum_onsite(params, target)
    return gtar_spectrum(params, target)


def max_abs_eigenvalue(params: ModelParams, protocol=Protocol.ONSITE, target: int = 0) -> float:
    if Protocol.parse(protocol) is Protocol.ONSITE:
        M = onsite_survival_operator(params, target)
    else:
        M = gtar_matrix(params, target)
    return float(np.abs(np.linalg.eigvals(M)).max())


def _partial_geometric(mu: np.ndarray, N: int) -> np.ndarray:
    """``(1 - mu^N) / (1 - mu)``, continuous through ``mu = 1``."""
    out = np.empty_like(mu, dtype=complex)
    near = np.abs(1.0 - mu) < 1e-8
    far = ~near
    out[far] = (1.0 - mu[far] ** N) / (1.0 - mu[far])
    # sum_{j<N} mu^j expanded to second order about mu = 1
    d = mu[near] - 1.0
    out[near] = N + d * N * (N - 1) / 2.0 + d ** 2 * N * (N - 1) * (N - 2) / 6.0
    return out


def null_measurement_spectral(params: ModelParams, initial, target: int = 0, N: int = 1) -> float:
    """Tracking null-measurement probability ``S_N`` from the ``G_tar`` eigensystem.

    Each eigenpair contributes ``<tar|R> <L|G|p_in> / <L|R>`` weighted by
    ``mu^N / (1 - mu)``; the constant ``1 - P_det(inf)`` vanishes whenever
    detection is eventually certain.  The sum is evaluated as
    ``1 - sum_k c_k (1 - mu_k^N) / (1 - mu_k)``, which is the same
    expression without the pole at ``mu = 1``.

    Raises
    ------
    DefectiveDecomposition
        If left and right eigenvectors are not biorthogonal, or the result
        carries an imaginary part above ``TOL.imag_residue``.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    p_in = np.abs(np.asarray(initial, dtype=complex)) ** 2
    G = stochastic_matrix(params)
    eig = general_eigendecompose(G @ _complement_projector(params.dim, target), left=True)
    if eig.defective:
        raise DefectiveDecomposition(
            f"G_tar is defective at {params} (min |<L|R>| = {eig.biorthogonality.min():.2e})")
    L, R, mu = eig.left, eig.right, eig.eigenvalues
    weights = (R[target] * (L.conj().T @ (G @ p_in))) / np.einsum("ik,ik->k", L.conj(), R)
    S = 1.0 - np.sum(weights * _partial_geometric(mu, N))
    if abs(S.imag) > TOL.imag_residue:
        raise DefectiveDecomposition(f"spectral S_N has imaginary part {S.imag:.2e}")
    return float(S.real)


def null_measurement_recursion(params: ModelParams, initial, protocol=Protocol.TRACKING,
                               target: int = 0, N: int = 1) -> float:
    setup = DetectionSetup(params, protocol, initial, target, max(N, 1))
    if N == 0:
        return 1.0
    return float(first_detection(setup).survival[-1])


def null_measurement(params: ModelParams, initial, protocol=Protocol.TRACKING, target: int = 0,
                     N: int = 1, engine: str = "spectral") -> Tuple[float, str]:
    """``S_N`` and the path that produced it ("spectral" or "recursion").

    The spectral route applies to tracking only and falls back to the
    recursion at defective points.
    """
    protocol = Protocol.parse(protocol)
    if engine == "spectral" and protocol is Protocol.TRACKING:
        try:
            return null_measurement_spectral(params, initial, target, N), "spectral"
        except DefectiveDecomposition:
            pass
    return null_measurement_recursion(params, initial, protocol, target, N), "recursion"


def crossover_curve(params: ModelParams, protocol, Ns: Sequence[int], target: int = 0) -> List[Tuple[int, float | None]]:
    """Return-problem ``<n(N)>`` for each requested ``N``, from one exact run."""
    Ns = [int(n) for n in Ns]
    if not Ns or min(Ns) < 1:
        raise ValueError("N values must be positive")
    setup = DetectionSetup.return_problem(params, protocol, max(Ns), target)
    F = first_detection(setup).F
    n = np.arange(1, len(F) + 1)
    mass = np.cumsum(F)
    moment = np.cumsum(n * F)
    out = []
    for N in Ns:
        m = mass[N - 1]
        out.append((N, float(moment[N - 1] / m) if m > TOL.undefined_mass else None))
    return out


@dataclass(frozen=True)
class UnitCrossing:
    """A peak of ``max|lambda|(gtau)`` that reaches ``level``, with its level crossings."""

    peak: float
    peak_value: float
    left: float
    right: float


def locate_unit_eigenvalues(alpha: float, gtau_min: float, gtau_max: float,
                            protocol=Protocol.ONSITE, level: float = 1.0 - TOL.unit_eigenvalue,
                            grid: int = 4001, xtol: float = 1e-10, target: int = 0) -> List[UnitCrossing]:
    """Find where the largest survival eigenvalue modulus touches one along a ``gtau`` line.

    A coarse scan brackets local maxima, a bounded scalar search refines
    each peak, and bisection localizes the two crossings of ``level``
    around every peak that reaches it.
    """
    protocol = Protocol.parse(protocol)

    def m(g):
        return max_abs_eigenvalue(ModelParams.from_gtau(g, alpha), protocol, target)

    g = np.linspace(gtau_min, gtau_max, grid)
    vals = np.array([m(x) for x in g])
    out: List[UnitCrossing] = []
    for i in range(1, grid - 1):
        if not (vals[i] >= vals[i - 1] and vals[i] >= vals[i + 1]):
            continue
        if vals[i] < level - 1e-2:
            continue
        res = minimize_scalar(lambda x: -m(x), bounds=(g[i - 1], g[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        peak = float(res.x) if -res.fun >= vals[i] else float(g[i])
        top = max(-res.fun, vals[i])
        if top < level:
            continue
        if out and abs(out[-1].peak - peak) < (g[1] - g[0]):
            continue

        def f(x):
            return m(x) - level

        lo_edge = g[max(i - 1, 0)]
        while f(lo_edge) >= 0 and lo_edge > gtau_min:
            lo_edge = max(lo_edge - (g[1] - g[0]), gtau_min)
        hi_edge = g[min(i + 1, grid - 1)]
        while f(hi_edge) >= 0 and hi_edge < gtau_max:
            hi_edge = min(hi_edge + (g[1] - g[0]), gtau_max)
        left = brentq(f, lo_edge, peak, xtol=xtol) if f(lo_edge) < 0 else float(lo_edge)
        right = brentq(f, peak, hi_edge, xtol=xtol) if f(hi_edge) < 0 else float(hi_edge)
        out.append(UnitCrossing(peak=peak, peak_value=float(top), left=float(left), right=float(right)))
    return out


def max_abs_map(gtaus: Iterable[float], alphas: Iterable[float], protocol=Protocol.ONSITE,
                target: int = 0) -> np.ndarray:
    gtaus = list(gtaus)
    alphas = list(alphas)
    out = np.empty((len(gtaus), len(alphas)))
    for i, g in enumerate(gtaus):
        for j, a in enumerate(alphas):
            out[i, j] = max_abs_eigenvalue(ModelParams.from_gtau(g, a), protocol, target)
    return out


def first_detection_spectral(setup: DetectionSetup) -> FirstDetectionDistribution:
    """First-detection law from an eigen-expansion of the survival operator.

    Independent of the step-by-step recursion: the state (or probability
    vector) after ``n`` null outcomes is expanded in the right eigenvectors
    of ``(I - P) U`` (resp. ``(I - P) G``) and propagated by eigenvalue
    powers.

    Raises
    ------
    DefectiveDecomposition
        If the eigenvector basis is too ill-conditioned to expand in.
    """
    p, t, N = setup.params, setup.target, setup.N
    Q = _complement_projector(p.dim, t)
    if setup.protocol is Protocol.ONSITE:
        step = unitary(p)
        start = np.asarray(setup.initial, dtype=complex)
    else:
        step = stochastic_matrix(p).astype(complex)
        start = np.abs(np.asarray(setup.initial)) ** 2 + 0j
    eig = general_eigendecompose(Q @ step)
    R = eig.right
    if np.linalg.cond(R) > 1e8:
        raise DefectiveDecomposition(f"survival operator is (nearly) defective at {p}")
    coeff = np.linalg.solve(R, start)
    row = (step @ R)[t]                      # <t| step |R_k>
    powers = eig.eigenvalues[None, :] ** np.arange(N)[:, None]
    amp = powers @ (row * coeff)
    if setup.protocol is Protocol.ONSITE:
        F = np.abs(amp) ** 2
    else:
        F = amp.real
    return FirstDetectionDistribution.from_probabilities(F)
