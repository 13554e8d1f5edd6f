"""Closed polygonal loops and the discretized energy functional.

A loop of N points ``x_0 .. x_{N-1}`` (closure ``x_N = x_0``) has energy

    E_N = N * sum_i g(m_i)(d_i, d_i),   d_i = x_{i+1} - x_i,  m_i = x_i + d_i / 2

with the metric evaluated at segment midpoints.  This is the energy of the
piecewise linear loop parametrized over [0, 1] with step 1/N, so that
``E_N(gamma^m) = m^2 E_N(gamma)`` for iterates and ``F = sqrt(E_N)`` equals
the length for constant-speed loops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DiscretizationError, ResourceError
from .manifold_models import MetricChart

MIN_POINTS = 8
ITERATE_CAP = 16384
# periodic components of a segment may not exceed this fraction of the period
MAX_SEGMENT_FRACTION = 0.25


class DiscreteLoop:
    """Immutable closed N-gon in chart coordinates."""

    __slots__ = ("points", "chart", "tag")

    def __init__(self, points, chart: MetricChart, tag: str = ""):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != chart.dim:
            raise DiscretizationError(f"points must have shape (N, {chart.dim}), got {pts.shape}")
        pts = chart.wrap(pts)
        if pts.shape[0] < MIN_POINTS:
            raise DiscretizationError(f"a loop needs at least {MIN_POINTS} points, got {pts.shape[0]}")
        chart.check_domain(pts)
        d = chart.delta(pts, np.roll(pts, -1, axis=0))
        p = chart.periodic
        if p.any():
            worst = np.max(np.abs(d[:, p]) / chart.spans[p])
            if worst > MAX_SEGMENT_FRACTION:
                raise DiscretizationError(
                    f"segment spans {worst:.3f} of a period (limit {MAX_SEGMENT_FRACTION}); refine the loop")
        if (~p).any():
            worst = np.max(np.abs(d[:, ~p]) / chart.spans[~p])
            if worst > MAX_SEGMENT_FRACTION:
                raise DiscretizationError(
                    f"segment spans {worst:.3f} of the coordinate range; refine the loop")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "tag", tag)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteLoop is immutable")

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"DiscreteLoop(N={self.n_segments}, chart={self.chart.name!r}, tag={self.tag!r})"

    @property
    def n_segments(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.chart.dim

    def flat(self) -> np.ndarray:
        return self.points.reshape(-1)

    def with_points(self, points, tag=None) -> "DiscreteLoop":
        return DiscreteLoop(points, self.chart, self.tag if tag is None else tag)

    def rotated(self, shift: int) -> "DiscreteLoop":
        """Cyclic relabeling of the points (the discrete circle action)."""
        return self.with_points(np.roll(self.points, -shift, axis=0))

    def segments(self):
        x = self.points
        d = self.chart.delta(x, np.roll(x, -1, axis=0))
        return d, self.chart.wrap(x + 0.5 * d)

    def tangent_direction(self) -> np.ndarray:
        """Per-point central difference (x_{i+1} - x_{i-1}) / 2, flattened."""
        x = self.points
        t = 0.5 * self.chart.delta(np.roll(x, 1, axis=0), np.roll(x, -1, axis=0))
        return t.reshape(-1)


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    sqrt_energy: float
    length: float
    gradient_norm: float


def constant_loop(chart: MetricChart, x, N: int = MIN_POINTS) -> DiscreteLoop:
    return DiscreteLoop(np.tile(np.asarray(x, float), (N, 1)), chart)


def energy(loop: DiscreteLoop) -> float:
    d, mid = loop.segments()
    g = loop.chart.metric(mid)
    return float(loop.n_segments * np.einsum("ia,iab,ib->", d, g, d))


def length(loop: DiscreteLoop) -> float:
    d, mid = loop.segments()
    g = loop.chart.metric(mid)
    return float(np.sum(np.sqrt(np.maximum(np.einsum("ia,iab,ib->i", d, g, d), 0.0))))


def sqrt_energy(loop: DiscreteLoop) -> float:
    return float(np.sqrt(energy(loop)))


def gradient(loop: DiscreteLoop) -> np.ndarray:
    """Exact derivative of E_N, shape (N, n)."""
    N = loop.n_segments
    d, mid = loop.segments()
    g = loop.chart.metric(mid)
    dg = loop.chart.metric_derivs(mid)
    gd = np.einsum("iab,ib->ia", g, d)
    q = np.einsum("iabk,ia,ib->ik", dg, d, d)
    # segment i contributes -2 g d + q/2 to x_i and 2 g d + q/2 to x_{i+1}
    out = -2.0 * gd + 0.5 * q
    out += np.roll(2.0 * gd + 0.5 * q, 1, axis=0)
    return N * out


def residual_scale(loop: DiscreteLoop, E: float | None = None) -> float:
    """Norm of the per-segment momenta 2N g d; the natural gradient scale."""
    E = energy(loop) if E is None else E
    return 2.0 * np.sqrt(loop.n_segments * max(E, 0.0))


def relative_residual(loop: DiscreteLoop, grad=None) -> float:
    grad = gradient(loop) if grad is None else grad
    scale = residual_scale(loop)
    gn = float(np.linalg.norm(grad))
    return gn / scale if scale > 0 else gn


def hessian(loop: DiscreteLoop) -> np.ndarray:
    """Analytic second derivative of E_N as a dense symmetric (nN, nN) matrix.

    Only diagonal blocks and blocks of cyclic neighbours are nonzero.
    """
    N, n = loop.n_segments, loop.dim
    d, mid = loop.segments()
    g = loop.chart.metric(mid)
    dg = loop.chart.metric_derivs(mid)
    d2g = loop.chart.metric_second_derivs(mid)
    s_dd = 2.0 * g
    s_dm = 2.0 * np.einsum("ipbq,ib->ipq", dg, d)
    s_md = np.swapaxes(s_dm, 1, 2)
    s_mm = np.einsum("iabkl,ia,ib->ikl", d2g, d, d)
    h_aa = s_dd - 0.5 * (s_dm + s_md) + 0.25 * s_mm
    h_bb = s_dd + 0.5 * (s_dm + s_md) + 0.25 * s_mm
    h_ab = -s_dd - 0.5 * s_dm + 0.5 * s_md + 0.25 * s_mm

    H = np.zeros((N, n, N, n))
    idx = np.arange(N)
    nxt = (idx + 1) % N
    H[idx, :, idx, :] += h_aa
    H[nxt, :, nxt, :] += h_bb
    H[idx, :, nxt, :] += h_ab
    H[nxt, :, idx, :] += np.swapaxes(h_ab, 1, 2)
    H = N * H.reshape(N * n, N * n)
    return 0.5 * (H + H.T)


def report(loop: DiscreteLoop) -> EnergyReport:
    E = energy(loop)
    return EnergyReport(E, float(np.sqrt(E)), length(loop), float(np.linalg.norm(gradient(loop))))


def iterate(loop: DiscreteLoop, m: int, cap: int = ITERATE_CAP) -> DiscreteLoop:
    """The m-fold traversal gamma^m, sampled with mN points."""
    if int(m) != m or m < 1:
        raise ValueError(f"iterate order must be a positive integer, got {m}")
    m = int(m)
    if m * loop.n_segments > cap:
        raise ResourceError(f"iterate needs {m * loop.n_segments} points, cap is {cap}")
    if m == 1:
        return loop
    return loop.with_points(np.tile(loop.points, (m, 1)))


def refine(loop: DiscreteLoop) -> DiscreteLoop:
    """Double the resolution by inserting chart midpoints."""
    d, mid = loop.segments()
    pts = np.empty((2 * loop.n_segments, loop.dim))
    pts[0::2] = loop.points
    pts[1::2] = mid
    return loop.with_points(pts)
