"""Exact first-detection statistics for on-site and tracking monitoring.

On-site: only the target site is measured; a null outcome applies the
projector ``I - |tar><tar|`` and leaves the rest of the amplitude coherent.

    F_n = |<tar| (U (I - P))^{n-1} U |in>|^2

Tracking: the full position is measured each period, so the walk reduces
to the classical chain with column-stochastic matrix
``G[x, x'] = |<x|U|x'>|^2``.

    F_n = <tar| (G (I - P))^{n-1} G |p_in>

with ``p_in[x] = |<x|in>|^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from ._constants import TOL
from .exceptions import PairNotMatched
from .model import ModelParams, classify_phase_factors, closed_form_spectrum, unitary


class Protocol(str, Enum):
    ONSITE = "onsite"
    TRACKING = "tracking"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}; expected 'onsite' or 'tracking'") from None


def basis_state(index: int, dim: int = 3) -> np.ndarray:
    psi = np.zeros(dim, dtype=complex)
    psi[index] = 1.0
    return psi


def phase_superposition(phi: float, dim: int = 3) -> np.ndarray:
    """``(|1> + e^{i phi} |2>) / sqrt(2)``."""
    psi = np.zeros(dim, dtype=complex)
    psi[1] = 1.0 / np.sqrt(2.0)
    psi[2] = np.exp(1j * phi) / np.sqrt(2.0)
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm


@dataclass(frozen=True)
class DetectionSetup:
    params: ModelParams
    protocol: Protocol = Protocol.ONSITE
    initial: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    target: int = 0
    N: int = 20

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        d = self.params.dim
        if not 0 <= self.target < d:
            raise ValueError(f"target {self.target} outside 0..{d - 1}")
        init = basis_state(self.target, d) if self.initial is None else np.asarray(self.initial, dtype=complex)
        if init.shape != (d,):
            raise ValueError(f"initial state must have shape ({d},), got {init.shape}")
        if abs(np.linalg.norm(init) - 1.0) > TOL.normalization:
            raise ValueError(f"initial state is not normalized (norm {np.linalg.norm(init):.15f})")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        init = init.copy()
        init.setflags(write=False)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def return_problem(cls, params: ModelParams, protocol=Protocol.ONSITE, N: int = 20, target: int = 0):
        return cls(params, protocol, basis_state(target, params.dim), target, N)


@dataclass(frozen=True, eq=False)
class FirstDetectionDistribution:
    """``F[n-1]`` is the first-detection probability at measurement ``n``.

    ``mean_n`` is the conditional mean ``sum n F_n / sum F_n`` and is None
    when no detection mass exists.
    """

    F: np.ndarray
    mean_n: Optional[float]
    p_det: float
    survival: np.ndarray

    @property
    def N(self) -> int:
        return len(self.F)

    @classmethod
    def from_probabilities(cls, F) -> "FirstDetectionDistribution":
        F = _clean(np.asarray(F, dtype=float))
        total = float(F.sum())
        survival = np.clip(1.0 - np.cumsum(F), 0.0, 1.0)
        if total <= TOL.undefined_mass:
            mean = None
        else:
            mean = float(np.dot(np.arange(1, len(F) + 1), F) / total)
        return cls(F=F, mean_n=mean, p_det=min(total, 1.0), survival=survival)


def _clean(F: np.ndarray) -> np.ndarray:
    if F.size and F.min() < -TOL.internal_negative:
        raise ArithmeticError(f"first-detection probability {F.min():.3e} is negative beyond round-off")
    return np.where(F < TOL.negative_clamp, np.maximum(F, 0.0), F)


def fn_onsite(setup: DetectionSetup) -> FirstDetectionDistribution:
    if setup.protocol is not Protocol.ONSITE:
        raise ValueError("fn_onsite requires the on-site protocol")
    U = unitary(setup.params)
    t = setup.target
    phi = np.array(setup.initial, dtype=complex)
    F = np.empty(setup.N)
    for n in range(setup.N):
        phi = U @ phi
        F[n] = phi[t].real ** 2 + phi[t].imag ** 2
        phi[t] = 0.0
    return FirstDetectionDistribution.from_probabilities(F)


def stochastic_matrix(params: ModelParams) -> np.ndarray:
    """``G[x, x'] = |<x|U|x'>|^2``; columns sum to one."""
    return np.abs(unitary(params)) ** 2


def fn_tracking(setup: DetectionSetup) -> FirstDetectionDistribution:
    if setup.protocol is not Protocol.TRACKING:
        raise ValueError("fn_tracking requires the tracking protocol")
    G = stochastic_matrix(setup.params)
    t = setup.target
    q = np.abs(setup.initial) ** 2
    F = np.empty(setup.N)
    for n in range(setup.N):
        q = G @ q
        F[n] = q[t]
        q[t] = 0.0
    return FirstDetectionDistribution.from_probabilities(F)


def first_detection(setup: DetectionSetup) -> FirstDetectionDistribution:
    if setup.protocol is Protocol.ONSITE:
        return fn_onsite(setup)
    return fn_tracking(setup)


def recurrence_theorem_prediction(params: ModelParams, tol: float = TOL.phase_match, target: int = 0) -> int:
    """Large-N mean return time under on-site monitoring.

    Equals the number of distinct phase factors, provided every energy
    eigenstate overlaps the target; a warning is issued otherwise.
    """
    spec = closed_form_spectrum(params)
    if np.abs(spec.right[target]).min() < 1e-12:
        warnings.warn("an energy eigenstate has zero overlap with the target; "
                      "the distinct-phase count may not predict <n>", RuntimeWarning)
    return classify_phase_factors(params, tol).distinct_count


def detection_probability_map(base: DetectionSetup, gtaus: Iterable[float], second: Iterable[float],
                              axis: str = "phi") -> np.ndarray:
    """Total detection probability ``P_det(N)`` over a 2-D scan.

    With ``axis="phi"`` the initial state is ``(|1> + e^{i phi}|2>)/sqrt2``
    and ``alpha`` is taken from ``base``; with ``axis="alpha"`` the
    initial state of ``base`` is kept.  Rows follow ``gtaus``.
    """
    if axis not in ("phi", "alpha"):
        raise ValueError("axis must be 'phi' or 'alpha'")
    gtaus = list(gtaus)
    second = list(second)
    p = base.params
    out = np.empty((len(gtaus), len(second)))
    for i, g in enumerate(gtaus):
        for j, v in enumerate(second):
            if axis == "phi":
                params = ModelParams.from_gtau(g, p.alpha, p.gamma, p.dim)
                init = phase_superposition(v, p.dim)
            else:
                params = ModelParams.from_gtau(g, v, p.gamma, p.dim)
                init = base.initial
            setup = DetectionSetup(params, base.protocol, init, base.target, base.N)
            out[i, j] = first_detection(setup).p_det
    return out


def delta_p_det(params: ModelParams, protocol=Protocol.ONSITE, N: int = 10) -> float:
    """``P_det`` starting from site 1 minus ``P_det`` starting from site 2, target site 0."""
    d = params.dim
    p1 = first_detection(DetectionSetup(params, protocol, basis_state(1, d), 0, N)).p_det
    p2 = first_detection(DetectionSetup(params, protocol, basis_state(2, d), 0, N)).p_det
    return p1 - p2


def chiral_asymmetry_map(gtaus: Iterable[float], alphas: Iterable[float], protocol=Protocol.ONSITE,
                         N: int = 10, gamma: float = 1.0) -> np.ndarray:
    gtaus = list(gtaus)
    alphas = list(alphas)
    out = np.empty((len(gtaus), len(alphas)))
    for i, g in enumerate(gtaus):
        for j, a in enumerate(alphas):
            out[i, j] = delta_p_det(ModelParams.from_gtau(g, a, gamma), protocol, N)
    return out


def dark_state_vector(params: ModelParams, pair, tol: float = TOL.phase_match, target: int = 0) -> np.ndarray:
    """State orthogonal to the target built from two degenerate eigenvectors.

    ``|psi> ~ <tar|E_k>|E_l> - <tar|E_l>|E_k>``; it only evolves by a global
    phase between measurements, so on-site monitoring never detects it.
    """
    k, l = sorted(int(i) for i in pair)
    cls = classify_phase_factors(params, tol)
    if not cls.is_matched(k, l):
        raise PairNotMatched(f"phase factors {k} and {l} differ by "
                             f"{cls.distances.get((k, l), float('nan')):.3e} at {params}")
    V = closed_form_spectrum(params).right
    psi = V[target, k] * V[:, l] - V[target, l] * V[:, k]
    return normalize(psi)
