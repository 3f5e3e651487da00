"""Hermitian diagonalization and quasienergy sectors.

Units are fixed by hbar = 1, so a detection period ``tau`` is the
dimensionless product ``gamma * tau / hbar`` once energies are measured in
units of the hopping ``gamma``.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

TWO_PI = 2.0 * np.pi

HERMITIAN_TOL = 1e-12
ENERGY_TOL = 1e-9
PHASE_TOL = 1e-9


class NotHermitianError(ValueError):
    """Raised when a matrix handed to the spectral layer is not Hermitian."""

    def __init__(self, asymmetry):
        self.asymmetry = float(asymmetry)
        super().__init__(
            f"matrix is not Hermitian: max |H_ij - conj(H_ji)| = {self.asymmetry:.3e}"
        )


@dataclass(frozen=True)
class HermitianMatrix:
    """A validated dense Hermitian matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        asym = np.max(np.abs(a - a.conj().T))
        if asym > HERMITIAN_TOL:
            raise NotHermitianError(asym)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def as_hermitian(H) -> HermitianMatrix:
    if isinstance(H, HermitianMatrix):
        return H
    return HermitianMatrix(np.asarray(H))


@dataclass(frozen=True)
class SpectralData:
    """Energy levels of a Hermitian matrix with an orthonormal eigenbasis.

    ``eigenvectors`` holds one column per eigenstate, grouped by level in
    ascending-energy order; ``offsets[l]:offsets[l + 1]`` selects level ``l``.
    """

    energies: np.ndarray
    multiplicities: np.ndarray
    eigenvectors: np.ndarray
    offsets: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def level_vectors(self, level: int) -> np.ndarray:
        return self.eigenvectors[:, self.offsets[level]:self.offsets[level + 1]]

    def projector(self, level: int) -> np.ndarray:
        V = self.level_vectors(level)
        return V @ V.conj().T

    def reconstruct(self) -> np.ndarray:
        E = np.repeat(self.energies, self.multiplicities)
        return (self.eigenvectors * E) @ self.eigenvectors.conj().T


def _orthonormalize(block):
    q, _ = np.linalg.qr(block)
    return q


def diagonalize(H, rel_tol: float = ENERGY_TOL) -> SpectralData:
    """Diagonalize ``H`` and merge numerically degenerate eigenvalues.

    Eigenvalues closer than ``rel_tol`` times the spectral scale (the range,
    or the largest magnitude for a flat spectrum) are pooled into one level
    whose eigenvectors are re-orthonormalized.
    """
    H = as_hermitian(H)
    w, v = np.linalg.eigh(H.entries)
    scale = max(w[-1] - w[0], np.max(np.abs(w)), 1e-300)
    cuts = np.nonzero(np.diff(w) > rel_tol * scale)[0] + 1
    offsets = np.concatenate(([0], cuts, [len(w)]))

    energies = np.empty(len(offsets) - 1)
    vectors = np.empty_like(v)
    for l in range(len(offsets) - 1):
        a, b = offsets[l], offsets[l + 1]
        energies[l] = w[a:b].mean()
        vectors[:, a:b] = v[:, a:b] if b - a == 1 else _orthonormalize(v[:, a:b])
    for arr in (energies, vectors, offsets):
        arr.setflags(write=False)
    mult = np.diff(offsets)
    mult.setflags(write=False)
    return SpectralData(energies, mult, vectors, offsets)


@dataclass(frozen=True)
class Sector:
    """One quasienergy sector: energy levels sharing ``exp(-i tau E)``."""

    phase: float
    levels: Tuple[int, ...]
    multiplicity: int
    basis: np.ndarray

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


@dataclass(frozen=True)
class QuasienergySectors:
    tau: float
    sectors: Tuple[Sector, ...]
    resonant: bool
    phase_tol: float = PHASE_TOL

    def __len__(self):
        return len(self.sectors)

    def __iter__(self):
        return iter(self.sectors)

    def __getitem__(self, i) -> Sector:
        return self.sectors[i]

    @property
    def dim(self) -> int:
        return self.sectors[0].basis.shape[0]

    @property
    def phases(self) -> np.ndarray:
        return np.array([s.phase for s in self.sectors])


def quasienergy_phases(spec: SpectralData, tau: float) -> np.ndarray:
    """``tau * E mod 2 pi`` for every level, in ``[0, 2 pi)``."""
    lam = np.mod(tau * spec.energies, TWO_PI)
    lam[lam >= TWO_PI] = 0.0
    return lam


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)


def _phase_clusters(phases, tol):
    """Group indices whose phases chain together within ``tol`` on the circle."""
    order = np.argsort(phases, kind="stable")
    clusters: List[List[int]] = []
    for k in order:
        if clusters and phases[k] - phases[clusters[-1][-1]] <= tol:
            clusters[-1].append(int(k))
        else:
            clusters.append([int(k)])
    # the interval [0, 2 pi) wraps around
    if len(clusters) > 1:
        gap = phases[clusters[0][0]] + TWO_PI - phases[clusters[-1][-1]]
        if gap <= tol:
            clusters[0] = clusters.pop() + clusters[0]
    return clusters


def _circular_mean(phases):
    m = np.angle(np.mean(np.exp(1j * np.asarray(phases))))
    return float(np.mod(m, TWO_PI)) % TWO_PI  # np.mod can round up to 2 pi


def build_sectors(spec: SpectralData, tau: float, tol: float = PHASE_TOL) -> QuasienergySectors:
    """Merge energy levels whose quasienergy phases coincide within ``tol``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam = quasienergy_phases(spec, tau)
    sectors = []
    resonant = False
    for members in _phase_clusters(lam, tol):
        members = sorted(members)
        resonant |= len(members) > 1
        basis = np.hstack([spec.level_vectors(l) for l in members])
        basis.setflags(write=False)
        sectors.append(
            Sector(
                phase=_circular_mean(lam[members]),
                levels=tuple(members),
                multiplicity=int(sum(spec.multiplicities[l] for l in members)),
                basis=basis,
            )
        )
    sectors.sort(key=lambda s: s.levels[0])
    return QuasienergySectors(float(tau), tuple(sectors), resonant, tol)


def detect_resonances(spec: SpectralData, tau: float, tol: float = PHASE_TOL) -> List[Tuple[int, int]]:
    """Level pairs ``(k, l)``, ``k < l``, with ``(E_k - E_l) tau = 0 mod 2 pi``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam = quasienergy_phases(spec, tau)
    dist = circular_distance(lam[:, None], lam[None, :])
    k, l = np.nonzero(np.triu(dist <= tol, k=1))
    return [(int(a), int(b)) for a, b in zip(k, l)]


def propagator(spec: SpectralData, tau: float) -> np.ndarray:
    """``exp(-i tau H)`` assembled from the eigendecomposition."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    E = np.repeat(spec.energies, spec.multiplicities)
    V = spec.eigenvectors
    return (V * np.exp(-1j * tau * E)) @ V.conj().T

