"""Integer bookkeeping for loop-product degrees on level (co)homology.

The ledger never decides whether a class is nonzero.  It tracks degrees and
levels through the Chas-Sullivan product (degree i + j - n on homology) and
the Goresky-Hingston product (degree i + j + n - 1 on cohomology relative to
constant loops), checks powers of a class against the Gromoll-Meyer window
[lam, lam + nu + 1], and replays the arithmetic that turns a non-nilpotent
class into an exact growth law for the iterates.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

from .errors import (InsufficientHorizonError, MalformedHypothesisError,
                     PreconditionError)
from .index_spectrum import maximal_index_law, minimal_sum_law


class Kind(str, enum.Enum):
    HOMOLOGY = "homology"
    COHOMOLOGY = "cohomology"


class LevelZeroWarning(UserWarning):
    """A class at level 0 entered a product; constant loops are excluded there."""


def cs_degree(i: int, j: int, n: int) -> int:
    return i + j - n


def gh_degree(i: int, j: int, n: int) -> int:
    return i + j + n - 1


def cs_power_degree(j: int, m: int, n: int) -> int:
    """Degree of the m-th Chas-Sullivan power of a degree-j class."""
    _check_order(m)
    return m * j - n * (m - 1)


def gh_power_degree(j: int, m: int, n: int) -> int:
    """Degree of the m-th Goresky-Hingston power of a degree-j class."""
    _check_order(m)
    return m * j + (m - 1) * (n - 1)


def power_degree(kind, j, m, n):
    return cs_power_degree(j, m, n) if Kind(kind) is Kind.HOMOLOGY else gh_power_degree(j, m, n)


def fold_degree(kind, j, m, n):
    """Left fold of the binary degree map, the independent route to the power degree."""
    _check_order(m)
    op = cs_degree if Kind(kind) is Kind.HOMOLOGY else gh_degree
    return reduce(lambda acc, _: op(acc, j, n), range(m - 1), j)


def _check_order(m):
    if int(m) != m or m < 1:
        raise ValueError(f"power order must be a positive integer, got {m}")


@dataclass(frozen=True)
class DegreeClass:
    """A (co)homology degree at a level of F.  ``coeff`` is metadata only."""
    degree: int
    level: Fraction
    kind: Kind = Kind.HOMOLOGY
    coeff: str = "Z"

    def __post_init__(self):
        object.__setattr__(self, "level", Fraction(self.level))
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        if self.level < 0:
            raise ValueError(f"level must be non-negative, got {self.level}")


def product(x: DegreeClass, y: DegreeClass, n: int) -> DegreeClass:
    """Degree and level of the product of two level classes.

    Levels add.  Level-0 inputs are flagged with ``LevelZeroWarning`` and
    processed anyway.
    """
    if x.kind is not y.kind:
        raise ValueError("cannot multiply a homology class with a cohomology class")
    if x.level == 0 or y.level == 0:
        warnings.warn("level-0 class in a loop product", LevelZeroWarning, stacklevel=2)
    op = cs_degree if x.kind is Kind.HOMOLOGY else gh_degree
    degree = op(x.degree, y.degree, n)
    if degree < 0:
        raise ValueError(f"product lands in degree {degree} < 0, where the group vanishes")
    coeff = x.coeff if x.coeff == y.coeff else "Z2"
    return DegreeClass(degree, x.level + y.level, x.kind, coeff)


def power(x: DegreeClass, m: int, n: int) -> DegreeClass:
    _check_order(m)
    return reduce(lambda acc, _: product(acc, x, n), range(m - 1), x)


@dataclass(frozen=True)
class Window:
    """Closed integer interval of degrees where local level groups may be nonzero."""
    lo: int
    hi: int

    def __contains__(self, i) -> bool:
        return self.lo <= i <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))


def gm_interval(lam: int, nullity: int) -> Window:
    if lam < 0 or nullity < 0:
        raise ValueError("index and nullity must be non-negative")
    return Window(lam, lam + nullity + 1)


def local_ranks_nondegenerate(lam: int) -> dict:
    """Ranks of the local level groups of a nondegenerate geodesic of index lam."""
    if lam < 0:
        raise ValueError("index must be non-negative")
    return {lam: 1, lam + 1: 1}


@dataclass(frozen=True)
class SpectrumHypothesis:
    """Index/nullity sequences for m = 1..M, measured or hypothetical.

    Construction rejects sequences that violate Bott's inequalities
    relative to m = 1 or the nullity bound 2(n-1).
    """
    n: int
    lambdas: tuple
    nullities: tuple

    def __post_init__(self):
        lam = tuple(int(v) for v in self.lambdas)
        nu = tuple(int(v) for v in self.nullities)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "nullities", nu)
        if self.n < 1:
            raise MalformedHypothesisError("dimension must be positive")
        if not lam or len(lam) != len(nu):
            raise MalformedHypothesisError("index and nullity sequences must be non-empty and equally long")
        if min(lam) < 0 or min(nu) < 0:
            raise MalformedHypothesisError("indices and nullities must be non-negative")
        bad = infeasible_iterates(self.n, lam, nu)
        if bad:
            raise MalformedHypothesisError(f"Bott inequalities violated at m = {bad}")

    @property
    def lambda1(self) -> int:
        return self.lambdas[0]

    @property
    def nullity1(self) -> int:
        return self.nullities[0]

    @property
    def M(self) -> int:
        return len(self.lambdas)


def infeasible_iterates(n, lam, nu) -> list:
    bad = []
    for m in range(1, len(lam) + 1):
        b = (m - 1) * (n - 1)
        if (abs(lam[m - 1] - m * lam[0]) > b
                or abs(lam[m - 1] + nu[m - 1] - m * (lam[0] + nu[0])) > b
                or nu[m - 1] > 2 * (n - 1)):
            bad.append(m)
    return bad


@dataclass(frozen=True)
class Consistency:
    """Outcome of the window check for all powers of a class.

    ``failed_m`` is None when every power lies in its window; otherwise the
    first failing m and ``side`` ("lower": degree below lam_m, "upper":
    degree above lam_m + nu_m + 1).
    """
    consistent: bool
    checked: int
    failed_m: int | None = None
    side: str | None = None
    degree: int | None = None
    window: Window | None = None


def nonnilpotent_consistency(hyp: SpectrumHypothesis, j: int, kind) -> Consistency:
    kind = Kind(kind)
    for m in range(1, hyp.M + 1):
        d = power_degree(kind, j, m, hyp.n)
        win = gm_interval(hyp.lambdas[m - 1], hyp.nullities[m - 1])
        if d not in win:
            return Consistency(False, m, m, "lower" if d < win.lo else "upper", d, win)
    return Consistency(True, hyp.M)


@dataclass(frozen=True)
class AmplificationCertificate:
    """Replay of the r-fold amplification for a deviation C at iterate k.

    Bott applied to gamma^k as base geodesic pushes the deviation to r*C at
    iterate r*k, while the window at r*k tolerates at most 2(n-1) + 1.
    ``bound`` and ``required`` are the two sides that clash at that iterate.
    """
    k: int
    deviation: int
    r: int
    iterate: int
    bound: int
    required: int
    relation: str


@dataclass(frozen=True)
class Conclusion:
    kind: Kind
    j: int
    forced_j: int
    horizon: int
    law: str
    predicted: tuple
    observed: tuple
    certificates: tuple

    @property
    def matches(self) -> bool:
        return not self.certificates


def horizon_needed(n: int) -> int:
    """Smallest M at which the finite argument pins the degree: M >= 2n."""
    return 2 * n


def derive_conclusion(hyp: SpectrumHypothesis, j: int, kind) -> Conclusion:
    """Replay the arithmetic forcing the degree and the growth law.

    Homology: the window at m = 1 gives j <= lam1 + nu1 + 1.  The lower
    window edge at m, with Bott's lower bound on lam_m + nu_m and
    nu_m <= 2(n-1), gives m (lam1 + nu1 + 1 - j) <= 2n - 1, so j is pinned
    to lam1 + nu1 + 1 once some m >= 2n is available.  The predicted law
    is lam_m + nu_m = m(lam1 + nu1) - (m-1)(n-1).

    Cohomology: symmetric, with j pinned to lam1 and the law
    lam_m = m lam1 + (m-1)(n-1).

    Raises
    ------
    PreconditionError
        If some power of the class leaves its window.
    InsufficientHorizonError
        If the hypothesis is too short to pin j.
    """
    kind = Kind(kind)
    n = hyp.n
    cons = nonnilpotent_consistency(hyp, j, kind)
    if not cons.consistent:
        raise PreconditionError(
            f"power m={cons.failed_m} has degree {cons.degree} outside window "
            f"[{cons.window.lo}, {cons.window.hi}] ({cons.side} side)", m=cons.failed_m)
    lam1, nu1 = hyp.lambda1, hyp.nullity1
    if kind is Kind.HOMOLOGY:
        target = lam1 + nu1 + 1
        # lower edge: j >= target - (2n-1)/m
        j_lo = max(target - math.floor(Fraction(2 * n - 1, m)) for m in range(1, hyp.M + 1))
        j_hi = target
    else:
        target = lam1
        j_lo = lam1
        # upper edge: j <= lam1 + (2n-1)/m
        j_hi = min(lam1 + math.floor(Fraction(2 * n - 1, m)) for m in range(1, hyp.M + 1))
    if j_lo != j_hi:
        raise InsufficientHorizonError(
            f"iterates up to M={hyp.M} leave j in [{j_lo}, {j_hi}]; need M >= {horizon_needed(n)}")
    forced = j_lo
    assert forced == target

    certs = []
    if kind is Kind.HOMOLOGY:
        predicted = tuple(minimal_sum_law(m, lam1, nu1, n) for m in range(1, hyp.M + 1))
        observed = tuple(l + v for l, v in zip(hyp.lambdas, hyp.nullities))
        law = "minimal_sum"
        for k in range(1, hyp.M + 1):
            C = observed[k - 1] - predicted[k - 1]
            if C > 0:
                r = (2 * n - 1) // C + 1
                rk = r * k
                # lam_{rk} >= law(rk) + rC - 2(n-1) but the window needs lam_{rk} <= law(rk) + 1
                certs.append(AmplificationCertificate(
                    k, C, r, rk,
                    bound=minimal_sum_law(rk, lam1, nu1, n) + r * C - 2 * (n - 1),
                    required=minimal_sum_law(rk, lam1, nu1, n) + 1,
                    relation="index lower bound exceeds window ceiling"))
    else:
        predicted = tuple(maximal_index_law(m, lam1, n) for m in range(1, hyp.M + 1))
        observed = tuple(hyp.lambdas)
        law = "maximal_index"
        for k in range(1, hyp.M + 1):
            C = predicted[k - 1] - observed[k - 1]
            if C > 0:
                r = (2 * n - 1) // C + 1
                rk = r * k
                # lam_{rk} + nu_{rk} + 1 <= law(rk) - rC + 2(n-1) + 1 but the window needs >= law(rk)
                certs.append(AmplificationCertificate(
                    k, C, r, rk,
                    bound=maximal_index_law(rk, lam1, n) - r * C + 2 * (n - 1) + 1,
                    required=maximal_index_law(rk, lam1, n),
                    relation="window floor exceeds index-plus-nullity ceiling"))
    return Conclusion(kind, j, forced, horizon_needed(n), law, predicted, observed, tuple(certs))


def consistent_pairs(n, lam1, nu1, j, kind, m):
    """All (lam_m, nu_m) compatible with Bott (relative to m = 1) and the window at m.

    Exhaustive enumeration; the constraints at different m are independent,
    so a consistent hypothesis of length M exists iff every m has a pair.
    """
    b = (m - 1) * (n - 1)
    d = power_degree(kind, j, m, n)
    out = []
    for nu in range(0, 2 * (n - 1) + 1):
        for lam in range(max(0, m * lam1 - b), m * lam1 + b + 1):
            if abs(lam + nu - m * (lam1 + nu1)) > b:
                continue
            if lam <= d <= lam + nu + 1:
                out.append((lam, nu))
    return out
