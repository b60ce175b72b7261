"""Born-rule trajectory sampling of the monitored walk.

Every run draws its uniforms from its own Philox stream keyed by
``(seed, run_index)``, so any subset of runs can be regenerated in
isolation and results do not depend on how runs are split across threads.
Run ``r`` consumes exactly one uniform per measurement it performs, taken
in order from its stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._constants import TOL
from .detection import DetectionSetup, FirstDetectionDistribution, Protocol
from .exceptions import DegenerateCollapse
from .model import unitary

DEFAULT_SHOTS = 32_000

_UINT64_MAX = 2 ** 64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _UINT64_MAX:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def run_generator(seed: int, run: int) -> np.random.Generator:
    """Independent generator for one run, keyed by ``(seed, run)``."""
    key = np.array([_check_seed(seed), run], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def run_uniforms(seed: int, runs: np.ndarray, N: int) -> np.ndarray:
    """Uniforms in [0, 1), one row of length ``N`` per run index."""
    out = np.empty((len(runs), N))
    for i, r in enumerate(runs):
        out[i] = run_generator(seed, int(r)).random(N)
    return out


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Outcome of ``shots`` independent monitored runs.

    ``outcomes[r]`` is the first-detection index of run ``r`` (1-based), or
    0 when the run was not detected within ``N`` measurements.
    """

    setup: DetectionSetup
    shots: int
    seed: int
    outcomes: np.ndarray = field(repr=False)
    anomalies: int = 0

    @property
    def first_hits(self) -> np.ndarray:
        return self.outcomes[self.outcomes > 0]

    @property
    def undetected_count(self) -> int:
        return int(np.count_nonzero(self.outcomes == 0))

    @property
    def sample_mean_n(self) -> Optional[float]:
        hits = self.first_hits
        if hits.size == 0:
            return None
        return float(hits.sum() / hits.size)

    @property
    def sample_mean_stderr(self) -> float:
        hits = self.first_hits
        if hits.size < 2:
            return math.nan
        return float(hits.std(ddof=1) / math.sqrt(hits.size))

    @property
    def sample_p_det(self) -> float:
        return float(self.first_hits.size / self.shots)


def _simulate_onsite(U, psi0, target, N, uniforms):
    K = uniforms.shape[0]
    psi = np.tile(psi0, (K, 1))
    outcome = np.zeros(K, dtype=np.int64)
    anomaly = np.zeros(K, dtype=bool)
    active = np.ones(K, dtype=bool)
    Ut = U.T
    for n in range(N):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        amp = psi[idx] @ Ut
        p = amp[:, target].real ** 2 + amp[:, target].imag ** 2
        hit = uniforms[idx, n] < p
        outcome[idx[hit]] = n + 1
        active[idx[hit]] = False
        miss = idx[~hit]
        rest = amp[~hit]
        rest[:, target] = 0.0
        norm = np.linalg.norm(rest, axis=1)
        bad = norm < TOL.degenerate_collapse
        if bad.any():
            anomaly[miss[bad]] = True
            active[miss[bad]] = False
        good = ~bad
        psi[miss[good]] = rest[good] / norm[good, None]
    return outcome, anomaly


def _simulate_tracking(U, psi0, target, N, uniforms):
    K = uniforms.shape[0]
    d = U.shape[0]
    outcome = np.zeros(K, dtype=np.int64)
    G = np.abs(U) ** 2
    colsum = G.sum(axis=0)
    if np.any(np.abs(colsum - 1.0) > TOL.eig_residual):
        raise ArithmeticError("Born probabilities do not sum to one")
    # the initial state enters through its site probabilities, as in fn_tracking
    probs0 = G @ (np.abs(psi0) ** 2)
    cdf_cols = np.cumsum(G, axis=0)
    cdf0 = np.cumsum(probs0)
    position = np.minimum(np.searchsorted(cdf0, uniforms[:, 0], side="right"), d - 1)
    hit = position == target
    outcome[hit] = 1
    active = ~hit
    for n in range(1, N):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        u = uniforms[idx, n]
        cdf = cdf_cols[:, position[idx]]            # (d, m)
        new = np.minimum((u[None, :] >= cdf).sum(axis=0), d - 1)
        position[idx] = new
        hit = new == target
        outcome[idx[hit]] = n + 1
        active[idx[hit]] = False
    return outcome, np.zeros(K, dtype=bool)


def _sample(setup: DetectionSetup, shots: int, seed: int, n_jobs: int, chunk: int) -> TrajectoryEnsemble:
    if shots < 1:
        raise ValueError("shots must be positive")
    seed = _check_seed(seed)
    U = unitary(setup.params)
    psi0 = np.asarray(setup.initial, dtype=complex)
    sim = _simulate_onsite if setup.protocol is Protocol.ONSITE else _simulate_tracking

    bounds = [(lo, min(lo + chunk, shots)) for lo in range(0, shots, chunk)]

    def work(b):
        runs = np.arange(b[0], b[1])
        return sim(U, psi0, setup.target, setup.N, run_uniforms(seed, runs, setup.N))

    if n_jobs == 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, bounds))
    outcomes = np.concatenate([p[0] for p in parts])
    anomalies = np.concatenate([p[1] for p in parts])
    return TrajectoryEnsemble(setup=setup, shots=shots, seed=seed, outcomes=outcomes,
                              anomalies=int(anomalies.sum()))


def sample_onsite(setup: DetectionSetup, shots: int = DEFAULT_SHOTS, seed: int = 0,
                  n_jobs: int = 1, chunk: int = 4096) -> TrajectoryEnsemble:
    """Emulate on-site monitoring: measure only the target after each period.

    A null outcome applies the complementary projector and renormalizes, so
    no information about the non-target amplitudes is used.  Runs whose
    post-measurement norm collapses below ``TOL.degenerate_collapse`` are
    counted as undetected anomalies.
    """
    if setup.protocol is not Protocol.ONSITE:
        raise ValueError("sample_onsite requires the on-site protocol")
    return _sample(setup, shots, seed, n_jobs, chunk)


def sample_tracking(setup: DetectionSetup, shots: int = DEFAULT_SHOTS, seed: int = 0,
                    n_jobs: int = 1, chunk: int = 4096) -> TrajectoryEnsemble:
    """Emulate tracking: record the walker's site after each period.

    The first site is drawn from ``G |psi_in|^2``; afterwards the walker
    hops from basis state to basis state with probabilities ``G[x', x]``.
    """
    if setup.protocol is not Protocol.TRACKING:
        raise ValueError("sample_tracking requires the tracking protocol")
    return _sample(setup, shots, seed, n_jobs, chunk)


def sample(setup: DetectionSetup, shots: int = DEFAULT_SHOTS, seed: int = 0, n_jobs: int = 1) -> TrajectoryEnsemble:
    if setup.protocol is Protocol.ONSITE:
        return sample_onsite(setup, shots, seed, n_jobs)
    return sample_tracking(setup, shots, seed, n_jobs)


def empirical_distribution(ens: TrajectoryEnsemble) -> FirstDetectionDistribution:
    counts = np.bincount(ens.outcomes, minlength=ens.setup.N + 1)[1:ens.setup.N + 1]
    return FirstDetectionDistribution.from_probabilities(counts / ens.shots)


def raise_on_anomaly(ens: TrajectoryEnsemble) -> TrajectoryEnsemble:
    if ens.anomalies:
        raise DegenerateCollapse(f"{ens.anomalies} runs hit a zero-norm null outcome")
    return ens
