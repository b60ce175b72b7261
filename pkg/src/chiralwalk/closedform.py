"""Zero-flux analytic results for the triangle return problem.

At ``alpha = 0`` the on-site and tracking first-detection laws are
geometric after the first step and depend on ``gamma*tau`` only through

    |z|^2   = 5/9 + 4/9 cos(3 gtau)     (probability of an immediate return)
    |eta|^2 = 2/9 - 2/9 cos(3 gtau)     (hop to one specific neighbour)
    |xi|^2  = |z|^2 + |eta|^2

Near a revival ``gtau = 2 pi k / 3`` the transitions of ``<n>`` are
broadened; the small parameter is ``eps^2 = (2/9) (3 gtau - 2 pi k)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .detection import Protocol


@dataclass(frozen=True)
class ClosedFormParams:
    z_sq: float
    eta_sq: float
    xi_sq: float
    eps_sq: float
    k: int

    @classmethod
    def at(cls, gtau: float, k: int | None = None) -> "ClosedFormParams":
        c = math.cos(3.0 * gtau)
        z_sq = 5.0 / 9.0 + 4.0 / 9.0 * c
        eta_sq = 2.0 / 9.0 - 2.0 / 9.0 * c
        if k is None:
            k = nearest_transition(gtau)
        return cls(z_sq, eta_sq, z_sq + eta_sq, epsilon_sq(gtau, k), int(k))


def nearest_transition(gtau: float) -> int:
    """Index ``k`` of the revival ``2 pi k / 3`` closest to ``gtau``."""
    return max(0, int(round(3.0 * gtau / (2.0 * math.pi))))


def epsilon_sq(gtau: float, k: int) -> float:
    return (2.0 / 9.0) * (3.0 * gtau - 2.0 * math.pi * k) ** 2


def _geom(x: float, m: int) -> float:
    # x**m with 0**0 == 1
    return 1.0 if m == 0 else x ** m


def fn_onsite_closed(gtau: float, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    z = ClosedFormParams.at(gtau, 0).z_sq
    if n == 1:
        return z
    return (1.0 - z) ** 2 * _geom(z, n - 2)


def fn_tracking_closed(gtau: float, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    cf = ClosedFormParams.at(gtau, 0)
    if n == 1:
        return cf.z_sq
    return 2.0 * cf.eta_sq ** 2 * _geom(cf.eta_sq + cf.z_sq, n - 2)


def mean_onsite_finite(gtau: float, N: int) -> float:
    """Conditional mean ``<n(N)>`` for on-site monitoring, ``alpha = 0``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    z = ClosedFormParams.at(gtau, 0).z_sq
    if z >= 1.0:
        return 1.0
    zN = z ** (N - 1)
    return (2.0 - zN * (1.0 + N * (1.0 - z))) / (1.0 - zN * (1.0 - z))


def mean_tracking_finite(gtau: float, N: int) -> float:
    """Conditional mean ``<n(N)>`` for tracking, ``alpha = 0``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    cf = ClosedFormParams.at(gtau, 0)
    xi, z, eta2 = cf.xi_sq, cf.z_sq, cf.eta_sq ** 2
    if xi >= 1.0:
        return 1.0
    xiN = xi ** N
    den = 2.0 * eta2 * (xi - xiN) - xi * z * (xi - 1.0)
    first = 2.0 * eta2 * (xi ** 2 - 2.0 * xi + xiN * (-N * xi + N + 1.0)) / ((xi - 1.0) * den)
    second = xi * z * (xi - 1.0) / den
    return first - second


def mean_onsite_broadened(gtau: float, N: int, k: int | None = None) -> float:
    if k is None:
        k = nearest_transition(gtau)
    b = N * epsilon_sq(gtau, k)
    return 2.0 - math.exp(-b) * (1.0 + b)


def mean_tracking_broadened(gtau: float, N: int, k: int | None = None) -> float:
    if k is None:
        k = nearest_transition(gtau)
    h = 0.5 * N * epsilon_sq(gtau, k)
    return 3.0 - 2.0 * math.exp(-h) * (1.0 + h)


def truncated_mean(F) -> float:
    """``sum n F_n / sum F_n`` over the supplied first-detection law."""
    F = np.asarray(F, dtype=float)
    return float(np.dot(np.arange(1, len(F) + 1), F) / F.sum())


_FINITE = {Protocol.ONSITE: mean_onsite_finite, Protocol.TRACKING: mean_tracking_finite}
_BROADENED = {Protocol.ONSITE: mean_onsite_broadened, Protocol.TRACKING: mean_tracking_broadened}
PLATEAU = {Protocol.ONSITE: 2.0, Protocol.TRACKING: 3.0}


def mean_finite(protocol, gtau: float, N: int) -> float:
    return _FINITE[Protocol.parse(protocol)](gtau, N)


def mean_broadened(protocol, gtau: float, N: int, k: int | None = None) -> float:
    return _BROADENED[Protocol.parse(protocol)](gtau, N, k)


def transition_halfwidth(mean_fn, N: int, k: int = 1, drop: float = 0.5, plateau: float = 2.0,
                         side: int = 1) -> float:
    """Distance in ``gtau`` from ``2 pi k / 3`` to where ``mean_fn`` reaches ``plateau - drop``.

    ``mean_fn(gtau, N)`` must rise monotonically away from the revival on
    the searched side, within one third of the revival spacing.
    """
    centre = 2.0 * math.pi * k / 3.0
    level = plateau - drop

    def g(x):
        return mean_fn(centre + side * x, N) - level

    hi = math.pi / 3.0
    lo = 1e-9
    if g(lo) > 0 or g(hi) < 0:
        raise ValueError("level is not bracketed around the revival")
    return brentq(g, lo, hi, xtol=1e-13, rtol=1e-13)
