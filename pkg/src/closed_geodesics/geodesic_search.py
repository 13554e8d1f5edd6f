"""Seeds, energy descent and gauge-fixed Newton refinement for closed geodesics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import loop_space as ls
from .errors import (BasinError, CatalogError, CollapseError,
                     DegenerateRefinementError, DiscretizationError, DomainError)
from .manifold_models import ManifoldModel

log = logging.getLogger(__name__)

TOLERANCE = 1e-10
NEWTON_MAX_ITER = 20
DIVERGENCE_WINDOW = 5
COLLAPSE_RATIO = 1e-3
GAUGE_FLATNESS = 1e-9


@dataclass(frozen=True)
class ClosedGeodesic:
    loop: ls.DiscreteLoop
    level: float
    residual: float
    seed_id: str = ""
    isolated_flag: bool = False
    iterations: int = 0
    model: ManifoldModel | None = field(default=None, compare=False, repr=False)
    log: tuple = field(default=(), compare=False, repr=False)

    @property
    def n_segments(self) -> int:
        return self.loop.n_segments

    @property
    def length(self) -> float:
        return ls.length(self.loop)

    def rotated(self, shift: int) -> "ClosedGeodesic":
        loop = self.loop.rotated(shift)
        return replace(self, loop=loop, level=ls.sqrt_energy(loop), residual=ls.relative_residual(loop))


@dataclass(frozen=True)
class SearchRecord:
    iteration: int
    residual: float
    energy: float


def seed_library(model: ManifoldModel, N: int = 128) -> list:
    """Analytic seed loops of a catalog model, each tagged with its seed id."""
    return [ls.DiscreteLoop(s.points(N), model.get_chart(s.chart), tag=s.seed_id) for s in model.seeds]


def get_seed(model: ManifoldModel, seed_id: str, N: int = 128) -> ls.DiscreteLoop:
    for s in model.seeds:
        if s.seed_id == seed_id:
            return ls.DiscreteLoop(s.points(N), model.get_chart(s.chart), tag=seed_id)
    raise CatalogError(f"model {model.name!r} has no seed {seed_id!r}; "
                       f"available: {[s.seed_id for s in model.seeds]}")


def _finish(loop, model, iterations, records, isolated) -> ClosedGeodesic:
    return ClosedGeodesic(
        loop=loop, level=ls.sqrt_energy(loop), residual=ls.relative_residual(loop),
        seed_id=loop.tag, isolated_flag=isolated, iterations=iterations, model=model,
        log=tuple(records),
    )


def _try_loop(loop, x):
    try:
        return loop.with_points(x.reshape(loop.points.shape))
    except (DiscretizationError, DomainError):
        return None


def gauge_directions(loop: ls.DiscreteLoop, model: ManifoldModel | None = None) -> np.ndarray:
    """Orthonormal basis of the symmetry directions at ``loop``.

    Always contains the discrete reparametrization direction; Killing fields
    declared by the model for the loop's chart are appended.
    """
    cols = [loop.tangent_direction()]
    if model is not None:
        for v in model.killing_fields(loop.chart.name, loop.points):
            cols.append(np.asarray(v, float).reshape(-1))
    V = np.column_stack(cols)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    keep = s > 1e-8 * s[0]
    return U[:, keep]


def flat_gauge_directions(H, B, flatness: float = GAUGE_FLATNESS) -> np.ndarray:
    """The part of span(B) along which H is numerically flat.

    The discrete energy keeps only some continuous symmetries exactly (chart
    translations do, rotations that mix chart coordinates do not).  A broken
    symmetry leaves a soft but nonzero Hessian direction; projecting it out
    would freeze the gradient component along it, so it stays in the solve.
    """
    if B.shape[1] == 0:
        return B
    scale = float(np.max(np.sum(np.abs(H), axis=1)))
    mu, W = np.linalg.eigh(B.T @ H @ B)
    return B @ W[:, np.abs(mu) <= flatness * scale]


def _sobolev_preconditioner(loop):
    N, n = loop.n_segments, loop.dim
    _, mid = loop.segments()
    gbar = np.mean(loop.chart.metric(mid), axis=0)
    lap = 2.0 * np.eye(N) - np.roll(np.eye(N), 1, axis=1) - np.roll(np.eye(N), -1, axis=1)
    P = 2.0 * N * np.kron(lap, gbar) + 2.0 * N * np.kron(np.eye(N), gbar) / N**2
    return sla.cho_factor(P)


def minimize(loop: ls.DiscreteLoop, model: ManifoldModel | None = None, tol: float = TOLERANCE,
             max_iter: int = 5000, polish: bool = True, isolated: bool = False) -> ClosedGeodesic:
    """Energy descent (H^1-preconditioned gradient with Armijo backtracking).

    Raises
    ------
    CollapseError
        If the energy falls below ``COLLAPSE_RATIO`` times its initial value:
        the loop is contracting toward a constant loop.
    """
    E0 = ls.energy(loop)
    if E0 <= 0.0:
        raise CollapseError("constant loop is not a closed geodesic", loop)
    records = []
    res = ls.relative_residual(loop)
    if res < tol:
        return _finish(loop, model, 0, [SearchRecord(0, res, E0)], isolated)
    E = E0
    step = 1.0
    for it in range(1, max_iter + 1):
        g = ls.gradient(loop).reshape(-1)
        cho = _sobolev_preconditioner(loop)
        direction = -sla.cho_solve(cho, g)
        slope = float(g @ direction)
        x0 = loop.flat()
        step = min(1.0, 2.0 * step)
        while True:
            trial = _try_loop(loop, x0 + step * direction)
            if trial is not None:
                Et = ls.energy(trial)
                if Et <= E + 1e-4 * step * slope:
                    break
            step *= 0.5
            if step < 1e-14:
                raise CollapseError("line search stalled", loop)
        loop, E = trial, Et
        res = ls.relative_residual(loop)
        records.append(SearchRecord(it, res, E))
        log.debug("minimize it=%d residual=%.3e energy=%.12g", it, res, E)
        if E < COLLAPSE_RATIO * E0:
            raise CollapseError(f"energy fell from {E0:.6g} to {E:.6g}: null-homotopic collapse", loop)
        if res < tol:
            return _finish(loop, model, it, records, isolated)
        if polish and res < 1e-6:
            geo = refine_newton(loop, model, tol=tol, isolated=isolated)
            return replace(geo, iterations=it + geo.iterations, log=tuple(records) + geo.log)
    raise BasinError(f"descent did not converge in {max_iter} iterations (residual {res:.3e})",
                     best=_finish(loop, model, max_iter, records, isolated))


def refine_newton(loop: ls.DiscreteLoop, model: ManifoldModel | None = None, tol: float = TOLERANCE,
                  max_iter: int = NEWTON_MAX_ITER, isolated: bool = False) -> ClosedGeodesic:
    """Newton iteration for a critical point of E_N, any Morse index.

    Each step solves the Hessian system on the orthogonal complement of the
    gauge directions (see ``gauge_directions``).  Steps are halved until the
    loop stays valid and the gradient norm does not blow up.
    """
    g = ls.gradient(loop).reshape(-1)
    res = ls.relative_residual(loop, g)
    records = [SearchRecord(0, res, ls.energy(loop))]
    best = loop, res
    growth = 0
    for it in range(1, max_iter + 1):
        if res < tol:
            return _finish(loop, model, it - 1, records, isolated)
        H = ls.hessian(loop)
        B = flat_gauge_directions(H, gauge_directions(loop, model))
        Q = sla.null_space(B.T) if B.shape[1] else np.eye(len(g))
        Hr = Q.T @ H @ Q
        rhs = -Q.T @ g
        try:
            y = np.linalg.solve(Hr, rhs)
            if not np.all(np.isfinite(y)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            mu = 1e-12 * np.linalg.norm(H, 2)
            try:
                y = np.linalg.solve(Hr + mu * np.eye(len(Hr)), rhs)
            except np.linalg.LinAlgError:
                raise DegenerateRefinementError(
                    "gauge-fixed Hessian singular after regularization",
                    best=_finish(best[0], model, it, records, isolated)) from None
            if not np.all(np.isfinite(y)):
                raise DegenerateRefinementError(
                    "gauge-fixed Hessian singular after regularization",
                    best=_finish(best[0], model, it, records, isolated))
        dx = Q @ y
        x0 = loop.flat()
        t = 1.0
        while True:
            trial = _try_loop(loop, x0 + t * dx)
            if trial is not None:
                g_t = ls.gradient(trial).reshape(-1)
                res_t = ls.relative_residual(trial, g_t)
                if np.isfinite(res_t) and (res_t < 2.0 * res or t < 1e-3):
                    break
            t *= 0.5
            if t < 1e-6:
                raise BasinError("no admissible Newton step", best=_finish(best[0], model, it, records, isolated))
        growth = growth + 1 if res_t > res else 0
        loop, g, res = trial, g_t, res_t
        records.append(SearchRecord(it, res, ls.energy(loop)))
        log.debug("newton it=%d residual=%.3e step=%.3g", it, res, t)
        if res < best[1]:
            best = loop, res
        if growth >= DIVERGENCE_WINDOW:
            raise BasinError(f"residual grew for {growth} consecutive steps",
                             best=_finish(best[0], model, it, records, isolated))
    if res < tol:
        return _finish(loop, model, max_iter, records, isolated)
    raise BasinError(f"Newton did not reach residual {tol:g} in {max_iter} steps (residual {res:.3e})",
                     best=_finish(best[0], model, max_iter, records, isolated))


def double_resolution(geodesic: ClosedGeodesic, model: ManifoldModel | None = None,
                      tol: float = TOLERANCE) -> ClosedGeodesic:
    """Insert midpoints and re-converge: the 2N partner of a geodesic."""
    model = model if model is not None else geodesic.model
    fine = ls.refine(geodesic.loop)
    out = refine_newton(fine, model, tol=tol, isolated=geodesic.isolated_flag)
    return replace(out, seed_id=geodesic.seed_id)
