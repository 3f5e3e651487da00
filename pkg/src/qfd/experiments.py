"""Parameter sweeps and large-ring computations built on the detection core.

Every ring here uses the node-label convention of :mod:`qfd.graphs`
(labels ``1..L``, with ``0`` and ``L`` naming the same site).
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import graphs
from .detection import (
    DetectionSeries,
    bright_dark_bases,
    simulate_unitary,
    survival_operator,
)
from .spectral import build_sectors, diagonalize, propagator

MAX_RING_SIZE = 2_000_000
MAX_EIG_SIZE = 4096


class ResourceGuardError(RuntimeError):
    """A requested computation exceeds the configured size cap."""


def thread_count(requested: Optional[int] = None) -> int:
    env = os.environ.get("QFD_THREADS")
    n = requested or os.cpu_count() or 1
    if env:
        n = min(n, max(1, int(env)))
    return max(1, n)


@dataclass(frozen=True)
class SweepGrid:
    alphas: Tuple[float, ...]
    taus: Tuple[float, ...]
    L: int = 6
    N: int = 50
    r_in: int = 1
    r_d: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if not self.alphas or not self.taus:
            raise ValueError("sweep grid needs at least one alpha and one tau")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if any(t <= 0 for t in self.taus):
            raise ValueError("all tau values must be positive")


def magnetic_ring_series(L, alpha, tau, r_in, r_d, n_max, gamma=1.0) -> DetectionSeries:
    spec = graphs.magnetic_ring(L, alpha, gamma)
    U = propagator(diagonalize(graphs.build(spec)), tau)
    return simulate_unitary(
        U, graphs.localized_state(spec, r_d), graphs.localized_state(spec, r_in), n_max
    )


def sweep_tau_alpha(grid: SweepGrid, threads: Optional[int] = None) -> np.ndarray:
    """``1 - S_N`` on the magnetic ring, shape ``(len(alphas), len(taus))``.

    Rows are parallelized over a thread pool capped by ``QFD_THREADS``; the
    compiled kernel releases the GIL, and results keep input order.
    """
    def row(alpha):
        spec = graphs.magnetic_ring(grid.L, alpha)
        sp = diagonalize(graphs.build(spec))
        psi_in = graphs.localized_state(spec, grid.r_in)
        psi_d = graphs.localized_state(spec, grid.r_d)
        return [1.0 - simulate_unitary(propagator(sp, tau), psi_d, psi_in, grid.N).S[-1]
                for tau in grid.taus]

    n = thread_count(threads)
    if n == 1:
        rows = [row(a) for a in grid.alphas]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(row, grid.alphas))
    return np.array(rows)


def n_half(L: int, alpha: float, tau: float, r_in: int = 1, r_d: int = 0,
           n_cap: int = 10_000) -> Optional[int]:
    """First ``n`` with ``S_n < 1/2``, or ``None`` if not reached by ``n_cap``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    S = magnetic_ring_series(L, alpha, tau, r_in, r_d, n_cap).S
    below = np.nonzero(S[1:] < 0.5)[0]
    return int(below[0]) + 1 if len(below) else None


@dataclass(frozen=True)
class Crossover:
    alpha: float
    F: np.ndarray
    n_c: Optional[int]
    F_at_n_c: Optional[float]


def fn_crossover(L: int, alphas: Sequence[float], tau: float, n_max: int,
                 r_in: int = 1, r_d: int = 0, factor: float = 2.0) -> Dict[float, Crossover]:
    """``F_n`` series per ``alpha`` and where each departs from ``alpha = 0``.

    ``n_c`` is the first ``n`` from which ``F_m(alpha) >= factor * F_m(0)``
    holds for every ``m`` up to ``n_max``: past it the slow modes dominate for
    good, so isolated interference dips of the reference series do not count.
    """
    ref = magnetic_ring_series(L, 0.0, tau, r_in, r_d, n_max).F
    out = {}
    for alpha in alphas:
        F = ref if alpha == 0 else magnetic_ring_series(L, alpha, tau, r_in, r_d, n_max).F
        n_c = F_c = None
        if alpha != 0:
            bad = np.nonzero(~(F >= factor * ref))[0]
            first = int(bad[-1]) + 1 if len(bad) else 0
            if first < n_max:
                n_c, F_c = first + 1, float(F[first])
        out[alpha] = Crossover(float(alpha), F, n_c, F_c)
    return out


def ring_phases(L: int, tau: float, alpha: float = 0.0, gamma: float = 1.0) -> np.ndarray:
    """``exp(-i tau E_k)`` for the plane waves ``k = 0..L-1`` of the ring."""
    k = np.arange(L)
    return np.exp(2j * tau * gamma * np.cos(2 * np.pi * k / L + alpha))


def _fourier_step(psi, phases):
    # fft coefficient k multiplies the plane wave e^{+i 2 pi k r / L} under ifft
    return np.fft.ifft(phases * np.fft.fft(psi))


def ring_survival_fourier(L: int, tau: float, psi_in, detect: int, n_max: int,
                          alpha: float = 0.0, snapshots: Sequence[int] = ()):
    """Protocol on a ring with the propagator applied in Fourier space.

    ``detect`` is a node label.  Returns ``(series, states)`` where ``states``
    maps each requested ``n`` to the undetected wave function after the
    ``n``-th failed measurement.
    """
    if L > MAX_RING_SIZE:
        raise ResourceGuardError(f"ring of {L} sites exceeds the cap {MAX_RING_SIZE}")
    d = graphs.node_index(graphs.magnetic_ring(L, alpha), detect)
    phases = ring_phases(L, tau, alpha)
    psi = np.array(psi_in, dtype=np.complex128)
    F = np.zeros(n_max)
    S = np.empty(n_max + 1)
    S[0] = np.vdot(psi, psi).real
    wanted = set(snapshots)
    states = {0: psi.copy()} if 0 in wanted else {}
    for n in range(1, n_max + 1):
        psi = _fourier_step(psi, phases)
        F[n - 1] = abs(psi[d]) ** 2
        psi[d] = 0.0
        S[n] = np.vdot(psi, psi).real
        if n in wanted:
            states[n] = psi.copy()
    return DetectionSeries(F, S), states


@dataclass(frozen=True)
class DensitySnapshot:
    n: int
    density: np.ndarray
    survival: float
    mean_distance: float


def spread_density(L: int, tau: float, ns: Sequence[int], start: Optional[int] = None,
                   detect: Optional[int] = None) -> List[DensitySnapshot]:
    """Undetected density ``|psi_n(x)|^2`` on a ring, start and detector at ``L/2`` by default.

    ``mean_distance`` is the ring distance to the start node averaged over
    the normalized undetected density.
    """
    if L % 2:
        raise ValueError("spread_density expects an even ring")
    start = L // 2 if start is None else start
    detect = L // 2 if detect is None else detect
    spec = graphs.ring(L)
    s = graphs.node_index(spec, start)
    ns = sorted(set(int(n) for n in ns))
    _, states = ring_survival_fourier(
        L, tau, graphs.localized_state(spec, start), detect, max(ns) if ns else 0, snapshots=ns
    )
    x = np.arange(L)
    dist = np.minimum(np.abs(x - s), L - np.abs(x - s))
    out = []
    for n in ns:
        p = np.abs(states[n]) ** 2
        S = float(p.sum())
        mean = float((p * dist).sum() / S) if S > 0 else float("nan")
        out.append(DensitySnapshot(n, p, S, mean))
    return out


def _symmetric_restriction(L, tau, r_d):
    """Survival operator restricted to the bright space of a ring."""
    spec = graphs.ring(L)
    sp = diagonalize(graphs.build(spec))
    psi_d = graphs.localized_state(spec, r_d)
    sectors = build_sectors(sp, tau)
    B = bright_dark_bases(sectors, psi_d).bright_matrix
    S = survival_operator(propagator(sp, tau), psi_d)
    return B.conj().T @ S @ B


def fast_eigenvalue_census(L: int, tau: float, threshold: float, mode: str = "symmetric",
                           r_d: Optional[int] = None) -> Tuple[int, int]:
    """Count survival-operator eigenvalues with ``1 - |zeta| > threshold``.

    ``mode="symmetric"`` restricts to the bright space, which on the ring is
    the subspace even under reflection through the detector (dimension
    ``L/2 + 1`` for even ``L``); ``mode="full"`` diagonalizes the whole
    ``L x L`` operator.  Returns ``(fast, total)``.
    """
    if L > MAX_EIG_SIZE:
        raise ResourceGuardError(f"dense eigensolve of size {L} exceeds the cap {MAX_EIG_SIZE}")
    r_d = L if r_d is None else r_d
    if mode == "symmetric":
        M = _symmetric_restriction(L, tau, r_d)
    elif mode == "full":
        spec = graphs.ring(L)
        sp = diagonalize(graphs.build(spec))
        M = survival_operator(propagator(sp, tau), graphs.localized_state(spec, r_d))
    else:
        raise ValueError(f"unknown census mode {mode!r}")
    try:
        zeta = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    fast = int(np.sum(1.0 - np.abs(zeta) > threshold))
    return fast, len(zeta)
