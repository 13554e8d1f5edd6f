"""Morse index and nullity of iterates, Bott's inequalities, growth regimes.

Everything is computed from the Hessian of E_N.  At a critical point with
E = a^2 > 0 the Hessian of F = sqrt(E) is d^2E / (2a), a positive multiple,
so the inertia reported here is the inertia of d^2F as well.

The sequence-level functions (``check_bott``, ``average_index``,
``classify_growth``, ``bott_defects``) accept any object exposing ``n``,
``lambdas`` and ``nullities``: measured spectra and symbolic hypotheses alike.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from . import loop_space as ls
from .errors import (GaugeDetectionError, InsufficientDataError, ResourceError,
                     UnstableIndexError)
from .geodesic_search import ClosedGeodesic, double_resolution

log = logging.getLogger(__name__)

TAU = 1e-6
AMBIGUITY_BAND = (0.1, 10.0)
MIN_KERNEL_OVERLAP = 0.99


@dataclass(frozen=True)
class IndexNullity:
    """Inertia data of one iterate.

    ``spectral_gap`` is the smallest |eigenvalue| outside the kernel,
    relative to the spectral scale (largest |eigenvalue|).
    """
    m: int
    index: int
    nullity: int
    kernel_overlap: float
    spectral_gap: float
    raw_kernel: int
    pinned_index: int
    n_segments: int
    spectral_scale: float
    warnings: tuple = ()

    @property
    def lam(self) -> int:
        return self.index


def _count_below(H, shift):
    """Number of eigenvalues of H below ``shift`` by Sylvester inertia of an LDL^T factorization."""
    _, D, _ = sla.ldl(H - shift * np.eye(len(H)))
    neg = 0
    i = 0
    while i < len(D):
        if i + 1 < len(D) and D[i + 1, i] != 0.0:
            neg += int(np.sum(np.linalg.eigvalsh(D[i:i + 2, i:i + 2]) < 0))
            i += 2
        else:
            neg += int(D[i, i] < 0)
            i += 1
    return neg


def pinned_index(H, n, threshold, method="ldl"):
    """Index of the Hessian restricted to loops with the first point held fixed."""
    sub = H[n:, n:]
    if method == "dense":
        return int(np.sum(np.linalg.eigvalsh(sub) < -threshold))
    return _count_below(sub, -threshold)


def index_nullity(geodesic: ClosedGeodesic, m: int, tau: float = TAU,
                  cap: int = ls.ITERATE_CAP, pinned_method: str = "ldl") -> IndexNullity:
    """Index and nullity of the m-th iterate from the full (un-gauged) Hessian.

    Raises
    ------
    GaugeDetectionError
        If the reparametrization direction is not (to cosine 0.99) inside
        the numerical kernel; the -1 correction would then be unjustified.
    ResourceError
        If the iterate exceeds the point cap.
    """
    loop = ls.iterate(geodesic.loop, m, cap=cap)
    H = ls.hessian(loop)
    w, V = np.linalg.eigh(H)
    scale = float(np.max(np.abs(w)))
    thr = tau * scale
    kernel = np.abs(w) <= thr
    index = int(np.sum(w < -thr))
    raw = int(np.sum(kernel))

    t = loop.tangent_direction()
    t = t / np.linalg.norm(t)
    overlap = float(np.linalg.norm(V[:, kernel].T @ t)) if raw else 0.0
    if overlap < MIN_KERNEL_OVERLAP:
        raise GaugeDetectionError(
            f"m={m}: reparametrization direction has kernel overlap {overlap:.4f} < {MIN_KERNEL_OVERLAP}")

    outside = np.abs(w[~kernel])
    gap = float(np.min(outside) / scale) if outside.size else float("inf")
    lo, hi = AMBIGUITY_BAND[0] * thr, AMBIGUITY_BAND[1] * thr
    notes = tuple(
        f"m={m}: eigenvalue {ev:.3e} (relative {abs(ev) / scale:.2e}) near the kernel threshold {tau:g}"
        for ev in w[(np.abs(w) >= lo) & (np.abs(w) <= hi)]
    )
    for note in notes:
        log.warning(note)
    return IndexNullity(
        m=m, index=index, nullity=raw - 1, kernel_overlap=overlap, spectral_gap=gap,
        raw_kernel=raw, pinned_index=pinned_index(H, loop.dim, thr, pinned_method),
        n_segments=loop.n_segments, spectral_scale=scale, warnings=notes,
    )


@dataclass
class IterateSpectrum:
    """Resolution-checked spectrum of the iterates of one geodesic.

    ``entries`` are computed at the geodesic's own resolution N and agree
    in index and nullity with ``fine_entries`` at 2N.  ``failures`` maps
    the first failing m to a reason; the spectrum is then ``partial``.
    """
    geodesic: ClosedGeodesic
    n: int
    entries: list = field(default_factory=list)
    fine_entries: list = field(default_factory=list)
    resolution_pair: tuple = ()
    failures: dict = field(default_factory=dict)
    m_requested: int = 0

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    @property
    def lambdas(self) -> list:
        return [e.index for e in self.entries]

    @property
    def nullities(self) -> list:
        return [e.nullity for e in self.entries]

    @property
    def m_max(self) -> int:
        return len(self.entries)

    @property
    def warnings(self) -> list:
        return [w for e in self.entries + self.fine_entries for w in e.warnings]


def iterate_spectrum(geodesic: ClosedGeodesic, m_max: int, model=None, fine: ClosedGeodesic | None = None,
                     tau: float = TAU, cap: int = ls.ITERATE_CAP, strict: bool = False) -> IterateSpectrum:
    """Index/nullity for m = 1..m_max at resolutions N and 2N.

    Stops at the first m that fails (gauge detection, instability, size
    cap) and records the reason; with ``strict=True`` the error is raised.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    if fine is None:
        fine = double_resolution(geodesic, model)
    spec = IterateSpectrum(geodesic=geodesic, n=geodesic.loop.dim,
                           resolution_pair=(geodesic.n_segments, fine.n_segments), m_requested=m_max)
    for m in range(1, m_max + 1):
        try:
            if m * fine.n_segments > cap:
                raise ResourceError(f"m={m}: iterate of the 2N loop needs {m * fine.n_segments} points, cap {cap}")
            coarse = index_nullity(geodesic, m, tau=tau, cap=cap)
            refined = index_nullity(fine, m, tau=tau, cap=cap)
            if (coarse.index, coarse.nullity) != (refined.index, refined.nullity):
                raise UnstableIndexError(
                    f"m={m}: (index, nullity) = {(coarse.index, coarse.nullity)} at N={geodesic.n_segments} "
                    f"but {(refined.index, refined.nullity)} at N={fine.n_segments}")
        except (GaugeDetectionError, UnstableIndexError, ResourceError) as exc:
            if strict:
                raise
            spec.failures[m] = str(exc)
            log.warning("spectrum truncated: %s", exc)
            break
        spec.entries.append(coarse)
        spec.fine_entries.append(refined)
    return spec


# -- sequence-level analysis --------------------------------------------------

def _seqs(spec):
    lam = [int(v) for v in spec.lambdas]
    nu = [int(v) for v in spec.nullities]
    if not lam or len(lam) != len(nu):
        raise InsufficientDataError("spectrum is empty or index/nullity lengths differ")
    return int(spec.n), lam, nu


@dataclass(frozen=True)
class BottRow:
    m: int
    index_slack: int
    sum_slack: int
    nullity_ok: bool

    @property
    def holds(self) -> bool:
        return self.index_slack >= 0 and self.sum_slack >= 0 and self.nullity_ok


@dataclass(frozen=True)
class BottReport:
    rows: tuple

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    def violations(self) -> list:
        return [r for r in self.rows if not r.holds]


def check_bott(spec) -> BottReport:
    """Slacks of |lam_m - m lam_1| <= (m-1)(n-1), the same for lam + nu, and nu_m <= 2(n-1).

    A negative slack is a violation.  The inequalities are unconditional, so
    a violation in a measured spectrum points to a numerical failure upstream.
    """
    n, lam, nu = _seqs(spec)
    rows = []
    for m in range(1, len(lam) + 1):
        bound = (m - 1) * (n - 1)
        rows.append(BottRow(
            m=m,
            index_slack=bound - abs(lam[m - 1] - m * lam[0]),
            sum_slack=bound - abs(lam[m - 1] + nu[m - 1] - m * (lam[0] + nu[0])),
            nullity_ok=nu[m - 1] <= 2 * (n - 1),
        ))
    return BottReport(tuple(rows))


def bott_defects(spec) -> list:
    """Per-m defects (m-1)(n-1) - |lam_m - m lam_1| and the same for the sums.

    Diagnostic only: the refined estimate for nondegenerate geodesics makes
    these grow without bound, but only asymptotically.
    """
    return [(r.m, r.index_slack, r.sum_slack) for r in check_bott(spec).rows]


@dataclass(frozen=True)
class AverageIndex:
    estimate: Fraction
    ratios: tuple
    enclosure: tuple

    @property
    def consistent(self) -> bool:
        lo, hi = self.enclosure
        return lo <= self.estimate <= hi


def average_index(spec) -> AverageIndex:
    """Tail-slope estimate of lim lam_m / m with a rigorous enclosure.

    Applying Bott's first inequality to gamma^m as base geodesic gives
    |avg - lam_m / m| <= (n-1)/m for every m; the enclosure intersects
    these intervals.
    """
    n, lam, _ = _seqs(spec)
    if len(lam) < 3:
        raise InsufficientDataError("average index needs at least three iterates")
    lo = max(Fraction(lam[m - 1] - (n - 1), m) for m in range(1, len(lam) + 1))
    hi = min(Fraction(lam[m - 1] + (n - 1), m) for m in range(1, len(lam) + 1))
    ratios = tuple(Fraction(lam[m - 1], m) for m in range(1, len(lam) + 1))
    return AverageIndex(Fraction(lam[-1] - lam[-2]), ratios, (lo, hi))


class GrowthKind(str, enum.Enum):
    MINIMAL_SUM = "MinimalSum"
    MAXIMAL_INDEX = "MaximalIndex"
    BOTH = "Both"
    NEITHER = "Neither"


@dataclass(frozen=True)
class GrowthRow:
    m: int
    index: int
    nullity: int
    minimal_sum: int
    minimal_sum_holds: bool
    maximal_index: int
    maximal_index_holds: bool


@dataclass(frozen=True)
class GrowthClassification:
    kind: GrowthKind
    certificate: tuple
    m_max_checked: int

    def first_failure(self, law: str):
        attr = "minimal_sum_holds" if law == "sum" else "maximal_index_holds"
        return next((r.m for r in self.certificate if not getattr(r, attr)), None)


def minimal_sum_law(m, lam1, nu1, n):
    return m * (lam1 + nu1) - (m - 1) * (n - 1)


def maximal_index_law(m, lam1, n):
    return m * lam1 + (m - 1) * (n - 1)


def classify_growth(spec) -> GrowthClassification:
    n, lam, nu = _seqs(spec)
    rows = []
    for m in range(1, len(lam) + 1):
        s = minimal_sum_law(m, lam[0], nu[0], n)
        i = maximal_index_law(m, lam[0], n)
        rows.append(GrowthRow(m, lam[m - 1], nu[m - 1], s, lam[m - 1] + nu[m - 1] == s, i, lam[m - 1] == i))
    sum_ok = all(r.minimal_sum_holds for r in rows)
    idx_ok = all(r.maximal_index_holds for r in rows)
    kind = {(True, True): GrowthKind.BOTH, (True, False): GrowthKind.MINIMAL_SUM,
            (False, True): GrowthKind.MAXIMAL_INDEX, (False, False): GrowthKind.NEITHER}[(sum_ok, idx_ok)]
    return GrowthClassification(kind, tuple(rows), len(rows))


@dataclass(frozen=True)
class SequenceSpectrum:
    """Bare (n, lambdas, nullities) triple, e.g. read back from a CSV."""
    n: int
    lambdas: tuple
    nullities: tuple
