"""Stroboscopic first-detection dynamics and the total detection probability.

Three independent routes to ``P_det`` are provided:

* :func:`pdet_spectral`, the primed sum over quasienergy sectors with
  eigenspace projectors;
* :func:`pdet_projection`, the overlap of the initial state with the
  explicitly constructed bright space;
* :func:`pdet_aleksandrov`, the atomic spectral measure evaluated as
  ``sum mu_l |nu_l|^2``.

:func:`pdet_contour` integrates ``|phi(e^{i theta})|^2`` numerically and
:func:`simulate` runs the measurement protocol itself, so ``1 - S_N``
checks all of the above from the dynamics side.
"""
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .spectral import (
    TWO_PI,
    QuasienergySectors,
    as_hermitian,
    build_sectors,
    circular_distance,
    diagonalize,
    propagator,
)

NORM_TOL = 1e-10
DARK_TOL = 1e-12


def _unit(vec, name):
    v = np.asarray(vec, dtype=np.complex128).ravel()
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"{name} must be normalized, got norm {norm!r}")
    return v


def _check_dims(*arrays):
    dims = {a.shape[0] for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class DetectionSetup:
    psi_in: np.ndarray
    psi_d: np.ndarray
    tau: float

    def __post_init__(self):
        psi_in = _unit(self.psi_in, "psi_in")
        psi_d = _unit(self.psi_d, "psi_d")
        _check_dims(psi_in, psi_d)
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        for v in (psi_in, psi_d):
            v.setflags(write=False)
        object.__setattr__(self, "psi_in", psi_in)
        object.__setattr__(self, "psi_d", psi_d)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dim(self) -> int:
        return self.psi_in.shape[0]


@dataclass(frozen=True)
class DetectionSeries:
    """First-detection probabilities ``F[n-1] = F_n`` and survival ``S[n] = S_n``."""

    F: np.ndarray
    S: np.ndarray
    amplitudes: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_max(self) -> int:
        return len(self.F)

    @property
    def pdet(self) -> float:
        """``1 - S_N`` at the last recorded measurement."""
        return 1.0 - float(self.S[-1])


def survival_operator(U, psi_d) -> np.ndarray:
    """``(1 - |psi_d><psi_d|) U``."""
    U = np.asarray(U, dtype=np.complex128)
    psi_d = np.asarray(psi_d, dtype=np.complex128).ravel()
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] != psi_d.shape[0]:
        raise ValueError(f"dimension mismatch: U {U.shape}, psi_d {psi_d.shape}")
    return U - np.outer(psi_d, psi_d.conj() @ U)


def simulate_unitary(U, psi_d, psi_in, n_max: int) -> DetectionSeries:
    """Run the protocol for a precomputed one-period propagator."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    F, S, amps = kernels.run_survival(U, psi_d, psi_in, int(n_max))
    return DetectionSeries(F, S, amps)


def simulate(setup: DetectionSetup, H, n_max: int) -> DetectionSeries:
    """Apply the survival operator ``n_max`` times to ``psi_in``.

    ``F_n = |<psi_d| U S^{n-1} psi_in>|^2`` and ``S_n = ||S^n psi_in||^2``
    are accumulated on the state vector; powers of the survival operator
    are never formed.
    """
    H = as_hermitian(H)
    _check_dims(setup.psi_in, H.entries)
    U = propagator(diagonalize(H), setup.tau)
    return simulate_unitary(U, setup.psi_d, setup.psi_in, n_max)


def _sector_overlaps(sectors: QuasienergySectors, psi_d, psi_in):
    """Per sector: ``<psi_d|P|psi_d>`` and ``<psi_d|P|psi_in>``."""
    psi_d = np.asarray(psi_d, dtype=np.complex128)
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    _check_dims(psi_d, psi_in, sectors[0].basis)
    weights = np.empty(len(sectors))
    cross = np.empty(len(sectors), dtype=np.complex128)
    for k, sec in enumerate(sectors):
        a = sec.basis.conj().T @ psi_d
        b = sec.basis.conj().T @ psi_in
        weights[k] = np.vdot(a, a).real
        cross[k] = np.vdot(a, b)
    return weights, cross


def pdet_spectral(sectors: QuasienergySectors, psi_d, psi_in, dark_tol: float = DARK_TOL) -> float:
    """Primed sum ``sum_l |<psi_d|P_l|psi_in>|^2 / <psi_d|P_l|psi_d>``.

    Sectors whose weight on ``psi_d`` is below ``dark_tol`` are completely
    dark and skipped.
    """
    psi_d = np.asarray(psi_d, dtype=np.complex128)
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    _check_dims(psi_d, psi_in, sectors[0].basis)
    total = 0.0
    for sec in sectors:
        P = sec.projector
        w = np.vdot(psi_d, P @ psi_d).real
        if w < dark_tol:
            continue
        total += abs(np.vdot(psi_d, P @ psi_in)) ** 2 / w
    return float(total)


@dataclass(frozen=True)
class DarkState:
    sector: int
    vector: np.ndarray
    origin: str  # "complete" (whole sector dark) or "degeneracy"


@dataclass(frozen=True)
class SubspaceBases:
    bright: Tuple[Tuple[int, np.ndarray], ...]
    dark: Tuple[DarkState, ...]
    completely_dark_sectors: Tuple[int, ...]

    @property
    def bright_matrix(self) -> np.ndarray:
        return np.column_stack([v for _, v in self.bright])

    @property
    def dark_matrix(self) -> np.ndarray:
        dim = (self.bright[0][1] if self.bright else self.dark[0].vector).shape[0]
        if not self.dark:
            return np.zeros((dim, 0), dtype=np.complex128)
        return np.column_stack([d.vector for d in self.dark])

    @property
    def dim(self) -> int:
        return len(self.bright) + len(self.dark)


def stationary_dark_states(alpha) -> np.ndarray:
    """Coefficients of the dark states of one degenerate sector.

    ``alpha[m] = <E_m|psi_d>`` for the sector eigenbasis.  Column ``m - 1``
    of the result expands ``delta_m`` (``m = 1..g-1``) in that basis via the
    closed form of the Gram-Schmidt-like determinant.  ``alpha[0]`` must be
    non-zero; callers order the basis so the largest overlap comes first.
    """
    alpha = np.asarray(alpha, dtype=np.complex128)
    g = len(alpha)
    a2 = np.abs(alpha) ** 2
    cum = np.cumsum(a2)
    out = np.zeros((g, g - 1), dtype=np.complex128)
    for m in range(1, g):
        col = out[:, m - 1]
        col[:m] = -np.conj(alpha[m]) * alpha[:m]
        col[m] = cum[m - 1]
        col /= np.sqrt(cum[m - 1] * cum[m])
    return out


def _modified_gram_schmidt(vectors):
    q = np.array(vectors, dtype=np.complex128)
    for k in range(q.shape[1]):
        for j in range(k):
            q[:, k] -= np.vdot(q[:, j], q[:, k]) * q[:, j]
        q[:, k] /= np.linalg.norm(q[:, k])
    return q


def bright_dark_bases(sectors: QuasienergySectors, psi_d, dark_tol: float = DARK_TOL) -> SubspaceBases:
    psi_d = np.asarray(psi_d, dtype=np.complex128)
    _check_dims(psi_d, sectors[0].basis)
    bright, dark, complete = [], [], []
    for k, sec in enumerate(sectors):
        B = sec.basis
        alpha = B.conj().T @ psi_d
        weight = np.vdot(alpha, alpha).real
        if weight < dark_tol:
            complete.append(k)
            dark.extend(DarkState(k, B[:, m].copy(), "complete") for m in range(B.shape[1]))
            continue
        bright.append((k, B @ alpha / np.sqrt(weight)))
        if B.shape[1] > 1:
            order = np.argsort(-np.abs(alpha), kind="stable")
            coeffs = stationary_dark_states(alpha[order])
            deltas = _modified_gram_schmidt(B[:, order] @ coeffs)
            dark.extend(DarkState(k, deltas[:, m], "degeneracy") for m in range(deltas.shape[1]))
    return SubspaceBases(tuple(bright), tuple(dark), tuple(complete))


def pdet_projection(bases: SubspaceBases, psi_in) -> float:
    """Overlap of ``psi_in`` with the bright space."""
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    return float(sum(abs(np.vdot(b, psi_in)) ** 2 for _, b in bases.bright))


def dark_overlap(bases: SubspaceBases, psi_in) -> float:
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    return float(sum(abs(np.vdot(d.vector, psi_in)) ** 2 for d in bases.dark))


@dataclass(frozen=True)
class SpectralMeasure:
    """Atoms ``(lambda_l, mu_l, nu_l)`` of the wrapped measurement density."""

    phases: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    sector_ids: Tuple[int, ...] = ()

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def spectral_measure(sectors: QuasienergySectors, psi_d, psi_in, dark_tol: float = DARK_TOL) -> SpectralMeasure:
    weights, cross = _sector_overlaps(sectors, psi_d, psi_in)
    keep = np.nonzero(weights >= dark_tol)[0]
    return SpectralMeasure(
        phases=np.array([sectors[k].phase for k in keep]),
        weights=weights[keep],
        values=cross[keep] / weights[keep],
        sector_ids=tuple(int(k) for k in keep),
    )


def pdet_aleksandrov(measure: SpectralMeasure) -> float:
    return float(np.sum(measure.weights * np.abs(measure.values) ** 2))


class PoleError(ValueError):
    """``z`` sits on an atom of the spectral measure."""


def generating_function(sectors: QuasienergySectors, psi_d, psi_in, z, pole_tol: float = 1e-14):
    """``phi(z) = sum_n phi_n z^n`` from the quasienergy eigen-sum.

    Accepts scalar or array ``z`` inside or on the unit disk.  Raises
    :class:`PoleError` when some ``z`` coincides with ``e^{i lambda_l}`` of
    a sector that is not completely dark.
    """
    weights, cross = _sector_overlaps(sectors, psi_d, psi_in)
    keep = weights >= DARK_TOL
    rot = np.exp(-1j * np.array([s.phase for s in sectors]))[keep]
    weights, cross = weights[keep], cross[keep]
    z = np.asarray(z, dtype=np.complex128)
    zr = z[..., None] * rot
    gap = 1.0 - zr
    if np.any(np.abs(gap) < pole_tol):
        raise PoleError("z coincides with a quasienergy atom e^{i lambda}")
    num = np.sum(cross * zr / gap, axis=-1)
    den = np.sum(weights / gap, axis=-1)
    out = num / den
    return out[()] if out.ndim == 0 else out


def series_coefficients(sectors: QuasienergySectors, psi_d, psi_in, n_terms: int,
                        radius: float = 0.8, n_points: int = 512) -> np.ndarray:
    """Amplitudes ``phi_1..phi_{n_terms}`` by FFT over the circle ``|z| = radius``."""
    if n_points <= n_terms:
        raise ValueError("n_points must exceed n_terms")
    z = radius * np.exp(TWO_PI * 1j * np.arange(n_points) / n_points)
    c = np.fft.fft(generating_function(sectors, psi_d, psi_in, z)) / n_points
    n = np.arange(1, n_terms + 1)
    return c[n] / radius ** n


@dataclass(frozen=True)
class ContourResult:
    estimate: float
    error: float
    converged: bool


def pdet_contour(setup: DetectionSetup, H, n_nodes: int = 64, tol: float = 1e-10,
                 exclusion: float = 1e-4, max_levels: int = 14) -> ContourResult:
    """``(1 / 2 pi) int |phi(e^{i theta})|^2 d theta`` by Romberg quadrature.

    The circle is cut into arcs between the atoms ``lambda_l``; a window of
    half-width ``exclusion`` around each atom is never sampled and is bridged
    by a trapezoid through its two edge values.  Each arc starts with roughly
    ``n_nodes`` uniform intervals (in proportion to its length) and is halved
    until successive Richardson tables agree within ``tol``.
    """
    sectors = build_sectors(diagonalize(H), setup.tau)
    measure = spectral_measure(sectors, setup.psi_d, setup.psi_in)

    def f(theta):
        phi = generating_function(sectors, setup.psi_d, setup.psi_in, np.exp(1j * theta))
        return np.abs(phi) ** 2

    atoms = np.sort(measure.phases)
    if len(atoms) == 0:
        return ContourResult(0.0, 0.0, True)
    if np.any(np.diff(np.append(atoms, atoms[0] + TWO_PI)) <= 2 * exclusion):
        raise ValueError("quasienergy atoms closer than the exclusion window")

    total, err, converged = 0.0, 0.0, True
    for k, lam in enumerate(atoms):
        nxt = atoms[k + 1] if k + 1 < len(atoms) else atoms[0] + TWO_PI
        a, b = lam + exclusion, nxt - exclusion
        n0 = max(2, int(np.ceil(n_nodes * (b - a) / TWO_PI)))
        val, e, ok = _romberg(f, a, b, n0, tol, max_levels)
        total += val
        err += e
        converged &= ok
        # bridge the excluded window around the next atom
        total += exclusion * (f(np.array([b]))[0] + f(np.array([nxt + exclusion]))[0])
    return ContourResult(total / TWO_PI, err / TWO_PI, bool(converged))


def _romberg(f, a, b, n0, tol, max_levels):
    h = (b - a) / n0
    x = a + h * np.arange(n0 + 1)
    y = f(x)
    T = h * (y.sum() - 0.5 * (y[0] + y[-1]))
    rows = [[T]]
    n = n0
    for level in range(1, max_levels + 1):
        h /= 2
        mid = a + h * (2 * np.arange(n) + 1)
        T = 0.5 * T + h * f(mid).sum()
        n *= 2
        row = [T]
        for j, prev in enumerate(rows[-1], 1):
            row.append(row[-1] + (row[-1] - prev) / (4 ** j - 1))
        rows.append(row)
        delta = abs(row[-1] - rows[-2][-1])
        if level >= 2 and delta <= tol * max(1.0, abs(row[-1])):
            return row[-1], delta, True
    return rows[-1][-1], abs(rows[-1][-1] - rows[-2][-1]), False


@dataclass(frozen=True)
class SurvivalSpectrum:
    eigenvalues: np.ndarray
    unit_circle_ids: Tuple[int, ...]
    interior_ids: Tuple[int, ...]
    zeta_max: Optional[float]
    tol: float

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def survival_spectrum(S_matrix, tol: float = 1e-8) -> SurvivalSpectrum:
    """Eigenvalues of the survival operator, split at ``|zeta| = 1 - tol``."""
    try:
        zeta = np.linalg.eigvals(np.asarray(S_matrix, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"survival-operator eigensolve failed: {exc}") from exc
    mod = np.abs(zeta)
    on = tuple(int(i) for i in np.nonzero(mod > 1.0 - tol)[0])
    inside = tuple(int(i) for i in np.nonzero(mod <= 1.0 - tol)[0])
    zmax = float(mod[list(inside)].max()) if inside else None
    return SurvivalSpectrum(zeta, on, inside, zmax, tol)


def verify_pole_duality(H, setup: DetectionSetup, samples: Sequence[complex],
                        min_distance: float = 1e-6) -> float:
    """Largest relative residual of the determinant identity over ``samples``.

    Checks ``<psi_d|(1 - U/zeta)^{-1}|psi_d> = det(zeta - S) / det(zeta - U)``
    (matrix determinant lemma applied to ``zeta - U + |psi_d><psi_d|U``).
    Samples within ``min_distance`` of an eigenvalue of ``U`` or of the
    survival operator are skipped with a warning.
    """
    U = propagator(diagonalize(H), setup.tau)
    S = survival_operator(U, setup.psi_d)
    eig_u = np.linalg.eigvals(U)
    eig_s = np.linalg.eigvals(S)
    eye = np.eye(U.shape[0])
    worst = 0.0
    used = 0
    for zeta in np.atleast_1d(np.asarray(samples, dtype=np.complex128)):
        near = min(np.min(np.abs(eig_u - zeta)), np.min(np.abs(eig_s - zeta)))
        if near < min_distance or zeta == 0:
            warnings.warn(f"skipping sample {zeta}: {near:.1e} from an eigenvalue", stacklevel=2)
            continue
        x = np.linalg.solve(eye - U / zeta, setup.psi_d)
        lhs = np.vdot(setup.psi_d, x)
        sign_s, logdet_s = np.linalg.slogdet(zeta * eye - S)
        sign_u, logdet_u = np.linalg.slogdet(zeta * eye - U)
        rhs = sign_s / sign_u * np.exp(logdet_s - logdet_u)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
        used += 1
    if used == 0:
        raise ValueError("every sample was too close to an eigenvalue")
    return float(worst)


@dataclass(frozen=True)
class DecayCheck:
    fitted_rate: Optional[float]
    predicted_rate: Optional[float]
    relative_error: Optional[float]
    window: Optional[Tuple[int, int]]
    status: str  # "ok", "mismatch", "insufficient-decay" or "no-decay"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def decay_rate_check(series: DetectionSeries, spectrum: SurvivalSpectrum, s_infinity: float,
                     rel_tol: float = 0.05, min_decades: float = 6.0,
                     window: Optional[Tuple[int, int]] = None, floor: float = 1e-13) -> DecayCheck:
    """Fit the exponential tail of ``S_n - S_inf`` and compare with ``-2 ln|zeta_max|``.

    ``s_infinity`` is the dark-space overlap of the initial state, not a fit
    parameter.  Without an explicit ``window`` the fit uses the stretch where
    the excess has dropped below a thousandth of its start and is still above
    ``floor``; the excess must fall by ``min_decades`` overall or the check
    reports ``"insufficient-decay"`` (the fit is still returned when possible).
    """
    excess = np.asarray(series.S) - s_infinity
    predicted = None
    if spectrum.zeta_max is not None and spectrum.zeta_max > 0:
        predicted = -2.0 * np.log(spectrum.zeta_max)
    start = excess[0]
    if start <= floor:
        return DecayCheck(None, predicted, None, None, "no-decay")

    n = np.arange(len(excess))
    if window is None:
        mask = (excess < 1e-3 * start) & (excess > max(floor, start * 1e-12))
        idx = np.nonzero(mask)[0]
        if len(idx) < 5:
            return DecayCheck(None, predicted, None, None, "insufficient-decay")
        window = (int(idx[0]), int(idx[-1]))
    lo, hi = window
    sel = slice(lo, hi + 1)
    if np.any(excess[sel] <= 0):
        return DecayCheck(None, predicted, None, window, "insufficient-decay")
    slope = np.polyfit(n[sel], np.log(excess[sel]), 1)[0]
    fitted = float(-slope)
    decayed = np.log10(start / max(excess[-1], 1e-300)) >= min_decades
    rel = None if predicted is None else abs(fitted - predicted) / predicted
    if not decayed:
        status = "insufficient-decay"
    elif rel is None or rel > rel_tol:
        status = "mismatch"
    else:
        status = "ok"
    return DecayCheck(fitted, predicted, rel, window, status)
