"""Exit criteria of the package, runnable from pytest and from ``closed-geodesics verify``.

Each ``criterion_*`` function returns a ``CriterionResult``; expensive
geodesics and spectra are cached per process so the criteria share them.
"""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geodesic_search as gs
from . import index_spectrum as isp
from . import loop_space as ls
from . import manifold_models as mm
from . import string_degree_ledger as sdl

N_COARSE = 128
M_MAX = 5

# (model name, frozen params, seed) used for the spectrum criteria
SPECTRUM_CASES = {
    "sphere": ("sphere", (("radius", 1.0),), "equator"),
    "torus": ("torus", (), "winding_1_0"),
    "ellipsoid": ("ellipsoid", (("a", 1.05), ("c", 1.0)), "equator"),
    "revolution": ("revolution", (), "parallel_0"),
}
NEWTON_MODELS = (
    ("sphere", ()), ("torus", ()), ("ellipsoid", ()),
    ("ellipsoid", (("a", 1.05), ("c", 1.0))), ("revolution", ()),
)
NEITHER_FIXTURE = isp.SequenceSpectrum(2, (1, 3, 5, 6), (0, 0, 0, 0))

# Every numerical threshold used by a criterion; integer criteria are exact.
TOLERANCES = {
    "sphere_runtime_s": 60.0,
    "torus_level": 1e-10,
    "fd_gradient_rel": 1e-5,
    "fd_hessian_rel": 1e-4,
    "orbit_level": 1e-12,
    "newton_residual": 1e-10,
    "newton_max_iter": 10,
}


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.name}: {self.detail}"


@lru_cache(maxsize=None)
def model(name, params=()):
    return mm.build_model(name, **dict(params))


@lru_cache(maxsize=None)
def geodesic(name, params, seed, N=N_COARSE):
    mdl = model(name, params)
    return gs.refine_newton(gs.get_seed(mdl, seed, N), mdl)


@lru_cache(maxsize=None)
def spectrum(case):
    name, params, seed = SPECTRUM_CASES[case]
    logging.getLogger("closed_geodesics.index_spectrum").setLevel(logging.ERROR)
    t0 = time.perf_counter()
    spec = isp.iterate_spectrum(geodesic(name, params, seed), M_MAX, model(name, params))
    return spec, time.perf_counter() - t0


def _fine_view(spec):
    return isp.SequenceSpectrum(spec.n, tuple(e.index for e in spec.fine_entries),
                                tuple(e.nullity for e in spec.fine_entries))


def criterion_1() -> CriterionResult:
    spec, elapsed = spectrum("sphere")
    expected = [(2 * m - 1, 2) for m in range(1, M_MAX + 1)]
    coarse = [(e.index, e.nullity) for e in spec.entries]
    fine = [(e.index, e.nullity) for e in spec.fine_entries]
    ok = coarse == expected and fine == expected and elapsed < TOLERANCES["sphere_runtime_s"] and spec.resolution_pair == (128, 256)
    return CriterionResult(1, "sphere oracle", ok,
                           f"N={spec.resolution_pair} (lam, nu)={coarse} / {fine}, {elapsed:.1f}s")


def criterion_2() -> CriterionResult:
    spec, _ = spectrum("torus")
    expected = [(0, 1)] * M_MAX
    coarse = [(e.index, e.nullity) for e in spec.entries]
    fine = [(e.index, e.nullity) for e in spec.fine_entries]
    level = spec.geodesic.level
    ok = coarse == expected and fine == expected and abs(level - 1.0) <= TOLERANCES["torus_level"]
    return CriterionResult(2, "torus oracle", ok, f"(lam, nu)={coarse} / {fine}, level-1={level - 1.0:.1e}")


def criterion_3() -> CriterionResult:
    parts, ok = [], True
    for case in SPECTRUM_CASES:
        spec, _ = spectrum(case)
        stable = not spec.partial and spec.m_max == M_MAX
        holds = isp.check_bott(spec).holds and isp.check_bott(_fine_view(spec)).holds
        ok &= stable and holds
        parts.append(f"{case}:{'ok' if stable and holds else 'FAIL'}")
    sphere_rows = isp.check_bott(spectrum("sphere")[0]).rows
    extremal = all(r.index_slack == 0 for r in sphere_rows)
    ok &= extremal
    return CriterionResult(3, "Bott inequalities", ok, f"{' '.join(parts)}, sphere first-pair equality={extremal}")


def criterion_4() -> CriterionResult:
    got = {}
    for case, want in (("sphere", isp.GrowthKind.BOTH), ("torus", isp.GrowthKind.MINIMAL_SUM)):
        spec, _ = spectrum(case)
        got[case] = (isp.classify_growth(spec).kind, isp.classify_growth(_fine_view(spec)).kind, want)
    neither = isp.classify_growth(NEITHER_FIXTURE).kind
    ok = all(a == b == w for a, b, w in got.values()) and neither is isp.GrowthKind.NEITHER
    detail = ", ".join(f"{c}={a.value}/{b.value}" for c, (a, b, _) in got.items()) + f", fixture={neither.value}"
    return CriterionResult(4, "growth classification", ok, detail)


def _representatives(sets, rng, extra=3):
    yield [s[0] for s in sets]
    yield [s[-1] for s in sets]
    for _ in range(extra):
        yield [s[rng.integers(len(s))] for s in sets]


def proof_engine_sweep(M=12, n_max=4, lam_max=6, seed=0):
    """Exhaustive sweep of (n, lam1, nu1, j, kind); returns (consistent classes, mismatches)."""
    rng = np.random.default_rng(seed)
    classes, mismatches = 0, []
    for n in range(1, n_max + 1):
        for lam1, nu1 in itertools.product(range(lam_max + 1), range(2 * (n - 1) + 1)):
            for kind in sdl.Kind:
                for j in range(0, lam1 + nu1 + 2 * n + 2):
                    sets = [sdl.consistent_pairs(n, lam1, nu1, j, kind, m) for m in range(1, M + 1)]
                    if not all(sets):
                        continue
                    classes += 1
                    want = lam1 + nu1 + 1 if kind is sdl.Kind.HOMOLOGY else lam1
                    if j != want:
                        mismatches.append((n, lam1, nu1, kind.value, j, "consistent with wrong degree"))
                        continue
                    for pairs in _representatives(sets, rng):
                        hyp = sdl.SpectrumHypothesis(n, [p[0] for p in pairs], [p[1] for p in pairs])
                        out = sdl.derive_conclusion(hyp, j, kind)
                        if out.forced_j != want:
                            mismatches.append((n, lam1, nu1, kind.value, j, out.forced_j))
    return classes, mismatches


def criterion_5() -> CriterionResult:
    classes, mismatches = proof_engine_sweep()
    torus = sdl.SpectrumHypothesis(2, [0] * 12, [1] * 12)
    cons = sdl.nonnilpotent_consistency(torus, 0, sdl.Kind.COHOMOLOGY)
    ok = not mismatches and classes > 0 and cons.failed_m == 4
    return CriterionResult(5, "proof-engine identities", ok,
                           f"{classes} consistent classes, {len(mismatches)} mismatches, "
                           f"torus/cohomology fails at m={cons.failed_m}")


def criterion_6() -> CriterionResult:
    bad = 0
    count = 0
    for kind in sdl.Kind:
        for m, j, n in itertools.product(range(1, 11), range(0, 21), range(1, 7)):
            count += 1
            bad += sdl.power_degree(kind, j, m, n) != sdl.fold_degree(kind, j, m, n)
    return CriterionResult(6, "degree arithmetic", bad == 0, f"{count} cases, {bad} disagreements")


def random_loop(mdl, rng, N=24, amplitude=0.05):
    """Smooth random closed loop near the first seed of a model."""
    seed = mdl.seeds[0]
    chart = mdl.get_chart(seed.chart)
    base = seed.points(N)
    s = 2 * np.pi * np.arange(N) / N
    pert = np.zeros_like(base)
    for k in range(1, 4):
        a = rng.standard_normal((2, chart.dim)) * amplitude / k
        pert += np.outer(np.cos(k * s), a[0]) + np.outer(np.sin(k * s), a[1])
    pert += rng.standard_normal(chart.dim) * amplitude
    return ls.DiscreteLoop(base + pert, chart)


def fd_errors(loop, h=1e-6):
    """Relative max-norm errors of the analytic gradient and Hessian against central differences."""
    x = loop.flat()
    g = ls.gradient(loop).reshape(-1)
    H = ls.hessian(loop)
    fd_g = np.empty_like(x)
    fd_H = np.empty_like(H)
    shape = loop.points.shape
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        lp, lm = loop.with_points((x + e).reshape(shape)), loop.with_points((x - e).reshape(shape))
        fd_g[k] = (ls.energy(lp) - ls.energy(lm)) / (2 * h)
        fd_H[:, k] = (ls.gradient(lp).reshape(-1) - ls.gradient(lm).reshape(-1)) / (2 * h)
    eg = np.max(np.abs(g - fd_g)) / np.max(np.abs(fd_g))
    eh = np.max(np.abs(H - fd_H)) / np.max(np.abs(fd_H))
    return eg, eh


def criterion_7(n_loops=100) -> CriterionResult:
    rng = np.random.default_rng(7)
    worst_g = worst_h = 0.0
    for name in mm.CATALOG:
        mdl = model(name)
        for _ in range(n_loops):
            eg, eh = fd_errors(random_loop(mdl, rng))
            worst_g, worst_h = max(worst_g, eg), max(worst_h, eh)
    ok = worst_g <= TOLERANCES["fd_gradient_rel"] and worst_h <= TOLERANCES["fd_hessian_rel"]
    return CriterionResult(7, "variational calculus", ok,
                           f"{n_loops} loops x {len(mm.CATALOG)} models, worst gradient {worst_g:.1e}, Hessian {worst_h:.1e}")


def criterion_8() -> CriterionResult:
    rng = np.random.default_rng(8)
    ok = True
    parts = []
    for case in SPECTRUM_CASES:
        spec, _ = spectrum(case)
        geo = spec.geodesic
        shift = int(rng.integers(1, geo.n_segments))
        rot = geo.rotated(shift)
        dlevel = abs(rot.level - geo.level)
        rotated = [isp.index_nullity(rot, e.m) for e in spec.entries]
        same = [(r.index, r.nullity) for r in rotated] == [(e.index, e.nullity) for e in spec.entries]
        ok &= same and dlevel <= TOLERANCES["orbit_level"]
        parts.append(f"{case}:shift={shift},dlevel={dlevel:.0e},{'same' if same else 'DIFF'}")
    return CriterionResult(8, "gauge/orbit invariance", ok, " ".join(parts))


def criterion_9() -> CriterionResult:
    ok = True
    count = 0
    for case in SPECTRUM_CASES:
        spec, _ = spectrum(case)
        for e in spec.entries + spec.fine_entries:
            count += 1
            ok &= e.pinned_index <= e.index <= e.pinned_index + (spec.n - 1)
    return CriterionResult(9, "fixed-endpoint sandwich", ok, f"{count} entries checked")


def criterion_10() -> CriterionResult:
    worst_res, worst_it, fails = 0.0, 0, []
    for name, params in NEWTON_MODELS:
        mdl = model(name, params)
        for loop in gs.seed_library(mdl, N_COARSE):
            try:
                geo = gs.refine_newton(loop, mdl, tol=TOLERANCES["newton_residual"],
                                       max_iter=TOLERANCES["newton_max_iter"])
            except Exception as exc:  # any failure counts against the criterion
                fails.append(f"{name}/{loop.tag}: {exc}")
                continue
            res = ls.relative_residual(geo.loop)
            worst_res, worst_it = max(worst_res, res), max(worst_it, geo.iterations)
            if res >= TOLERANCES["newton_residual"] or geo.iterations > TOLERANCES["newton_max_iter"]:
                fails.append(f"{name}/{loop.tag}")
    ok = not fails
    return CriterionResult(10, "Newton convergence", ok,
                           f"worst residual {worst_res:.1e}, most iterations {worst_it}"
                           + (f", failures: {fails}" if fails else ""))


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(echo=print) -> list:
    results = []
    for crit in CRITERIA:
        res = crit()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
