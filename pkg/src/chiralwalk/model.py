"""Chiral tight-binding ring: Hamiltonian, spectrum, phase-factor matching.

The ring Hamiltonian couples neighbouring sites with amplitude
``-gamma * exp(i alpha)`` in the direction ``x <- x+1``::

    H = -gamma e^{i alpha} (|0><1| + |1><2| + |2><0|) + h.c.

Its eigenvalues are ``E_k = -2 gamma cos(2 pi k / d + alpha)`` with
discrete-Fourier eigenvectors.  Everything time-dependent enters only
through the product ``gamma * tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Iterable, List, Tuple

import numpy as np

from ._constants import TOL
from .exceptions import DomainError
from .smallalg import EigenSystem, unitary_from_hamiltonian

SQRT3 = math.sqrt(3.0)


def _wrap_angle(a: float) -> float:
    """Reduce an angle to [-pi, pi], keeping +pi as +pi."""
    if -math.pi <= a <= math.pi:
        return float(a)
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class ModelParams:
    """One physical configuration of the ring.

    Parameters
    ----------
    gamma : float
        Hopping amplitude, > 0.
    alpha : float
        Flux phase in radians; reduced to [-pi, pi].
    tau : float
        Sampling interval (hbar = 1), >= 0.
    dim : int
        Number of sites (3 for the triangle).
    """

    gamma: float = 1.0
    alpha: float = 0.0
    tau: float = 0.0
    dim: int = 3

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError(f"dim must be an integer >= 3, got {self.dim}")
        object.__setattr__(self, "alpha", _wrap_angle(float(self.alpha)))
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def from_gtau(cls, gtau: float, alpha: float = 0.0, gamma: float = 1.0, dim: int = 3) -> "ModelParams":
        return cls(gamma=gamma, alpha=alpha, tau=gtau / gamma, dim=dim)

    @property
    def gtau(self) -> float:
        return self.gamma * self.tau

    def with_alpha(self, alpha: float) -> "ModelParams":
        return replace(self, alpha=alpha)


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    d = p.dim
    H = np.zeros((d, d), dtype=complex)
    hop = -p.gamma * np.exp(1j * p.alpha)
    for x in range(d):
        H[x, (x + 1) % d] += hop
    return H + H.conj().T


def unitary(p: ModelParams) -> np.ndarray:
    """One-period propagator ``exp(-i H tau)``."""
    return unitary_from_hamiltonian(build_hamiltonian(p), p.tau)


def energies(p: ModelParams) -> np.ndarray:
    k = np.arange(p.dim)
    return -2.0 * p.gamma * np.cos(2.0 * np.pi * k / p.dim + p.alpha)


def fourier_eigenvectors(dim: int) -> np.ndarray:
    """Columns ``v_k[x] = w^{k x} / sqrt(d)``, phased so the last site is real positive."""
    x = np.arange(dim)
    k = np.arange(dim)
    V = np.exp(2j * np.pi * np.outer(x, k) / dim) / math.sqrt(dim)
    return V * np.exp(-2j * np.pi * k * (dim - 1) / dim)


def closed_form_spectrum(p: ModelParams) -> EigenSystem:
    E = energies(p)
    V = fourier_eigenvectors(p.dim)
    H = build_hamiltonian(p)
    residuals = np.linalg.norm(H @ V - V * E, axis=0)
    return EigenSystem(eigenvalues=E, right=V, residuals=residuals)


def phase_factors(p: ModelParams) -> np.ndarray:
    return np.exp(-1j * energies(p) * p.tau)


@dataclass(frozen=True)
class PhaseFactorClassification:
    distinct_count: int
    matched_pairs: frozenset
    phase_factors: np.ndarray = field(repr=False)
    distances: dict = field(default_factory=dict, repr=False)

    def is_matched(self, k: int, l: int) -> bool:
        return (min(k, l), max(k, l)) in self.matched_pairs


def classify_phase_factors(p: ModelParams, tol: float = TOL.phase_match) -> PhaseFactorClassification:
    """Group coinciding phase factors ``exp(-i E_k tau)``.

    Two factors match when their chordal distance is at most ``tol``.
    Since that relation is not transitive, the distinct count is the number
    of connected components of the matched-pair graph.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = phase_factors(p)
    n = len(z)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    pairs = set()
    dist = {}
    for k, l in combinations(range(n), 2):
        dist[(k, l)] = float(abs(z[k] - z[l]))
        if dist[(k, l)] <= tol:
            pairs.add((k, l))
            parent[find(k)] = find(l)
    count = len({find(i) for i in range(n)})
    return PhaseFactorClassification(count, frozenset(pairs), z, dist)


def phase_diagram(alphas: Iterable[float], gtaus: Iterable[float], tol: float = TOL.phase_match) -> np.ndarray:
    """Distinct phase-factor counts on a grid, shape ``(len(alphas), len(gtaus))``."""
    alphas = list(alphas)
    gtaus = list(gtaus)
    out = np.empty((len(alphas), len(gtaus)), dtype=int)
    for i, a in enumerate(alphas):
        for j, g in enumerate(gtaus):
            out[i, j] = classify_phase_factors(ModelParams.from_gtau(g, a), tol).distinct_count
    return out


# -- analytic matching curves (triangle only) -------------------------------

_DENOM_EPS = 1e-12


@dataclass(frozen=True)
class MatchingCurve:
    """Closed-form gamma*tau(alpha) on which two phase factors coincide.

    ``family`` distinguishes the two printed branches of the (1, 2) pair:
    ``"even"`` for ``2 n pi / (sqrt3 sin a)`` and ``"odd"`` for
    ``-(2 n + 1) pi / (sqrt3 sin a)``.  The other pairs have one family.
    """

    pair: Tuple[int, int]
    branch: int
    family: str = "main"

    def denominator(self, alpha: float) -> float:
        if self.pair == (1, 2):
            return SQRT3 * math.sin(alpha)
        if self.pair == (0, 1):
            return math.sin(alpha + math.pi / 6) + math.cos(alpha)
        return math.sin(-alpha + math.pi / 6) + math.cos(alpha)

    def numerator(self) -> float:
        n = self.branch
        if self.pair == (1, 2):
            return 2 * n * math.pi if self.family == "even" else -(2 * n + 1) * math.pi
        return n * math.pi

    def __call__(self, alpha: float) -> float:
        den = self.denominator(alpha)
        if abs(den) < _DENOM_EPS:
            raise DomainError(f"matching curve {self.pair} undefined at alpha={alpha}")
        return self.numerator() / den

    @property
    def curve(self) -> Callable[[float], float]:
        return self.__call__


def _canonical_pair(pair) -> Tuple[int, int]:
    k, l = sorted(int(i) for i in pair)
    if (k, l) not in {(1, 2), (0, 1), (0, 2)}:
        raise ValueError(f"pair must be one of (1,2), (1,0), (2,0); got {pair}")
    return (k, l)


def matching_curves(pair, branches: Iterable[int]) -> List[MatchingCurve]:
    pair = _canonical_pair(pair)
    out = []
    for n in branches:
        if pair == (1, 2):
            out.append(MatchingCurve(pair, int(n), "even"))
            out.append(MatchingCurve(pair, int(n), "odd"))
        else:
            out.append(MatchingCurve(pair, int(n)))
    return out


# -- two-qubit encoding -------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# qubit basis |q1 q2>, index 2*q1 + q2; sigma_1 acts on q1 (left label)
TRACKING_MAPPING = {0: 0b00, 1: 0b01, 2: 0b10}
ONSITE_MAPPING = {0: 0b01, 1: 0b00, 2: 0b10}


def _two(a, b):
    return np.kron(a, b)


def qubit_hamiltonian(p: ModelParams) -> np.ndarray:
    """The 4x4 Pauli-sum encoding of the triangle Hamiltonian."""
    c = (_two(_X, _I2) + _two(_I2, _X) + _two(_Z, _X) + _two(_X, _Z)
         + _two(_X, _X) + _two(_Y, _Y))
    s = (_two(_Y, _I2) - _two(_I2, _Y) + _two(_Y, _Z) - _two(_Z, _Y)
         + _two(_X, _Y) - _two(_Y, _X))
    return -0.5 * p.gamma * (math.cos(p.alpha) * c + math.sin(p.alpha) * s)


@dataclass(frozen=True)
class QubitEncodingReport:
    qubit_hamiltonian: np.ndarray = field(repr=False)
    decoupled_residual: float
    tracking_mapping_residual: float
    onsite_mapping_residual: float
    onsite_alpha_sign_flipped: bool


def _restrict(Hq: np.ndarray, mapping: dict) -> np.ndarray:
    idx = [mapping[s] for s in range(3)]
    return Hq[np.ix_(idx, idx)]


def build_qubit_hamiltonian(p: ModelParams) -> QubitEncodingReport:
    if p.dim != 3:
        raise ValueError("qubit encoding is defined for the triangle only")
    Hq = qubit_hamiltonian(p)
    decoupled = float(max(np.abs(Hq[3, :3]).max(), np.abs(Hq[:3, 3]).max()))
    H = build_hamiltonian(p)
    H_flip = build_hamiltonian(p.with_alpha(-p.alpha))
    tracking = float(np.abs(_restrict(Hq, TRACKING_MAPPING) - H).max())
    onsite_block = _restrict(Hq, ONSITE_MAPPING)
    onsite_plain = float(np.abs(onsite_block - H).max())
    onsite_flip = float(np.abs(onsite_block - H_flip).max())
    flipped = onsite_flip < onsite_plain
    return QubitEncodingReport(
        qubit_hamiltonian=Hq,
        decoupled_residual=decoupled,
        tracking_mapping_residual=tracking,
        onsite_mapping_residual=min(onsite_plain, onsite_flip),
        onsite_alpha_sign_flipped=bool(flipped),
    )
