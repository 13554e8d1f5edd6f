"""Catalog of test manifolds given by metrics in coordinate charts.

Every chart evaluates its metric tensor vectorized over arrays of points of
shape ``(..., n)``.  Derivative arrays use the layout

    metric_derivs(x)[..., a, b, k]           = d g_ab / dx_k
    metric_second_derivs(x)[..., a, b, k, l] = d^2 g_ab / dx_k dx_l

Analytic derivatives come from sympy; charts built without them fall back to
central differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .errors import (CatalogError, DomainError, ModelDefinitionError,
                     UnsupportedDimensionError)

FD_STEP = 1e-5
FD_STEP_NESTED = 1e-4

__all__ = [
    "Coordinate", "MetricChart", "ManifoldModel", "SeedSpec",
    "metric_at", "christoffel_at", "gaussian_curvature_at",
    "christoffel", "build_model", "CATALOG",
    "sphere", "flat_torus", "ellipsoid", "surface_of_revolution",
]


@dataclass(frozen=True)
class Coordinate:
    name: str
    lo: float
    hi: float
    periodic: bool = False

    @property
    def span(self) -> float:
        return self.hi - self.lo


def _lambdify_array(syms, exprs, shape):
    """Vectorized numpy evaluation of a flat list of sympy expressions."""
    f = sp.lambdify(syms, list(exprs), "numpy")
    n = len(syms)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        base = x.shape[:-1]
        vals = f(*(x[..., i] for i in range(n)))
        out = np.stack([np.broadcast_to(np.asarray(v, dtype=float), base) for v in vals], axis=-1)
        return out.reshape(base + shape)

    return evaluate


class MetricChart:
    """A coordinate chart carrying a Riemannian metric.

    Parameters
    ----------
    name : str
        Chart identifier, unique within its model.
    coords : sequence of Coordinate
        Coordinate ranges; periodic coordinates wrap with period ``span``.
    metric : callable
        Maps points ``(..., n)`` to matrices ``(..., n, n)``.
    metric_derivs, metric_second_derivs : callable, optional
        Analytic first and second derivatives of the metric.  Missing ones
        are replaced by central differences with step ``FD_STEP * span``.
    """

    def __init__(self, name, coords, metric, metric_derivs=None,
                 metric_second_derivs=None, fd_step=FD_STEP):
        self.name = name
        self.coords = tuple(coords)
        self._metric = metric
        self._derivs = metric_derivs
        self._second = metric_second_derivs
        self.fd_step = fd_step
        self.spans = np.array([c.span for c in self.coords])
        self.lows = np.array([c.lo for c in self.coords])
        self.periodic = np.array([c.periodic for c in self.coords])

    def __repr__(self):
        return f"MetricChart({self.name!r}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def has_analytic_derivs(self) -> bool:
        return self._derivs is not None

    def without_derivs(self) -> "MetricChart":
        """Same metric, derivatives by finite differences only."""
        return MetricChart(self.name, self.coords, self._metric, fd_step=self.fd_step)

    # -- coordinates -------------------------------------------------------
    def wrap(self, x):
        x = np.array(x, dtype=float)
        p = self.periodic
        if p.any():
            x[..., p] = self.lows[p] + np.mod(x[..., p] - self.lows[p], self.spans[p])
        return x

    def delta(self, a, b):
        """Chart displacement b - a, periodic components of minimal size."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        p = self.periodic
        if p.any():
            s = self.spans[p]
            d[..., p] = d[..., p] - s * np.round(d[..., p] / s)
        return d

    def in_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for k, c in enumerate(self.coords):
            if not c.periodic:
                ok &= (x[..., k] > c.lo) & (x[..., k] < c.hi)
        return ok & np.all(np.isfinite(x), axis=-1)

    def check_domain(self, x):
        if not np.all(self.in_domain(x)):
            bad = np.asarray(x)[~self.in_domain(x)]
            raise DomainError(f"point(s) outside chart {self.name!r}: {bad[:3].tolist()}")

    # -- metric and derivatives -------------------------------------------
    def metric(self, x):
        return self._metric(x)

    def metric_derivs(self, x):
        if self._derivs is not None:
            return self._derivs(x)
        return self._central_diff(self._metric, x, self.fd_step)

    def metric_second_derivs(self, x):
        if self._second is not None:
            return self._second(x)
        if self._derivs is not None:
            d2 = self._central_diff(self._derivs, x, self.fd_step)
        else:
            inner = lambda y: self._central_diff(self._metric, y, FD_STEP_NESTED)
            d2 = self._central_diff(inner, x, FD_STEP_NESTED)
        return 0.5 * (d2 + np.swapaxes(d2, -1, -2))

    def _central_diff(self, f, x, step):
        x = np.asarray(x, dtype=float)
        cols = []
        for k in range(self.dim):
            h = step * self.spans[k]
            e = np.zeros(self.dim)
            e[k] = h
            cols.append((f(x + e) - f(x - e)) / (2.0 * h))
        return np.stack(cols, axis=-1)


def symbolic_chart(name, coords, symbols, g, fd_step=FD_STEP) -> MetricChart:
    """Chart whose metric and both derivative tensors are generated by sympy."""
    g = sp.Matrix(g)
    n = len(symbols)
    if g.shape != (n, n):
        raise ModelDefinitionError(f"metric of chart {name!r} is {g.shape}, expected {(n, n)}")
    entries = [g[a, b] for a in range(n) for b in range(n)]
    d1 = [sp.diff(g[a, b], symbols[k]) for a in range(n) for b in range(n) for k in range(n)]
    d2 = [sp.diff(g[a, b], symbols[k], symbols[l])
          for a in range(n) for b in range(n) for k in range(n) for l in range(n)]
    return MetricChart(
        name, coords,
        _lambdify_array(symbols, entries, (n, n)),
        _lambdify_array(symbols, d1, (n, n, n)),
        _lambdify_array(symbols, d2, (n, n, n, n)),
        fd_step=fd_step,
    )


@dataclass(frozen=True)
class SeedSpec:
    """Analytic seed: chart name plus a point generator ``N -> (N, n) array``."""
    seed_id: str
    chart: str
    points: Callable[[int], np.ndarray]
    kind: str = "geodesic"


@dataclass
class ManifoldModel:
    """A catalog manifold.

    ``charts`` always contains the primary chart under its own name.
    ``killing`` maps a chart name to infinitesimal isometries evaluated on
    point arrays; they are the symmetry directions gauge-fixed by Newton.
    """
    name: str
    params: dict
    chart: MetricChart
    charts: dict = field(default_factory=dict)
    curvature: Callable | None = None
    seeds: list = field(default_factory=list)
    killing: dict = field(default_factory=dict)
    embeddings: dict = field(default_factory=dict)
    simply_connected: bool = False

    def __post_init__(self):
        self.charts.setdefault(self.chart.name, self.chart)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def get_chart(self, name=None) -> MetricChart:
        if name is None:
            return self.chart
        try:
            return self.charts[name]
        except KeyError:
            raise CatalogError(f"model {self.name!r} has no chart {name!r}") from None

    def killing_fields(self, chart_name, points) -> list:
        return [f(points) for f in self.killing.get(chart_name, [])]


# -- pointwise operations -----------------------------------------------------

def _checked_point(chart: MetricChart, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (chart.dim,):
        raise DomainError(f"expected a point of dimension {chart.dim}, got shape {x.shape}")
    x = chart.wrap(x)
    chart.check_domain(x)
    return x


def metric_at(chart: MetricChart, x) -> np.ndarray:
    """Metric matrix at one point; exact symmetry, positive definiteness verified."""
    x = _checked_point(chart, x)
    g = chart.metric(x)
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ModelDefinitionError(
            f"metric of chart {chart.name!r} is not positive definite at {x.tolist()}") from None
    return g


def christoffel(g, dg):
    """Levi-Civita symbols ``G[..., k, i, j]`` from metric and derivative arrays."""
    ginv = np.linalg.inv(g)
    # lowered[..., l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    lowered = 0.5 * (np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg)
                     - np.einsum("...ijl->...lij", dg))
    return np.einsum("...kl,...lij->...kij", ginv, lowered)


def christoffel_at(chart: MetricChart, x) -> np.ndarray:
    g = metric_at(chart, x)
    x = chart.wrap(x)
    return christoffel(g, chart.metric_derivs(x))


def _brioschi(g, dg, d2g):
    E, F, G = g[0, 0], g[0, 1], g[1, 1]
    Eu, Ev = dg[0, 0, 0], dg[0, 0, 1]
    Fu, Fv = dg[0, 1, 0], dg[0, 1, 1]
    Gu, Gv = dg[1, 1, 0], dg[1, 1, 1]
    Evv, Fuv, Guu = d2g[0, 0, 1, 1], d2g[0, 1, 0, 1], d2g[1, 1, 0, 0]
    A = np.array([
        [-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
        [Fv - 0.5 * Gu, E, F],
        [0.5 * Gv, F, G],
    ])
    B = np.array([
        [0.0, 0.5 * Ev, 0.5 * Gu],
        [0.5 * Ev, E, F],
        [0.5 * Gu, F, G],
    ])
    return (np.linalg.det(A) - np.linalg.det(B)) / (E * G - F * F) ** 2


def gaussian_curvature_at(model: ManifoldModel, x, chart=None, method="auto") -> float:
    """Gaussian curvature of a surface model.

    ``method="auto"`` uses the model's closed form when it has one and the
    Brioschi formula otherwise; ``"brioschi"`` forces the latter.
    """
    ch = model.get_chart(chart)
    if ch.dim != 2:
        raise UnsupportedDimensionError(f"Gaussian curvature needs dim 2, model {model.name!r} has {ch.dim}")
    g = metric_at(ch, x)
    x = ch.wrap(x)
    if method == "auto" and model.curvature is not None and ch is model.chart:
        return float(model.curvature(x))
    if method not in ("auto", "brioschi"):
        raise ValueError(f"unknown curvature method {method!r}")
    return float(_brioschi(g, ch.metric_derivs(x), ch.metric_second_derivs(x)))


# -- catalog ------------------------------------------------------------------

def _embedding_fn(symbols, exprs):
    X = sp.Matrix(exprs)
    J = X.jacobian(sp.Matrix(symbols))
    n = len(symbols)
    pos = _lambdify_array(symbols, list(X), (3,))
    jac = _lambdify_array(symbols, list(J), (3, n))
    return pos, jac


def _rotation_field(chart: MetricChart, pos, jac, omega):
    """Pull back the ambient rotation field omega x X to chart coordinates."""
    omega = np.asarray(omega, dtype=float)

    def field_(points):
        X = pos(points)
        J = jac(points)
        v = np.cross(omega, X)
        rhs = np.einsum("...ia,...i->...a", J, v)
        return np.linalg.solve(chart.metric(points), rhs[..., None])[..., 0]

    return field_


def _constant_field(vec):
    vec = np.asarray(vec, dtype=float)
    return lambda points: np.broadcast_to(vec, np.shape(points)).copy()


def _uniform_circle(theta0):
    def pts(N):
        phi = 2.0 * np.pi * np.arange(N) / N
        return np.column_stack([np.full(N, theta0), phi])
    return pts


def sphere(radius: float = 1.0) -> ManifoldModel:
    """Round sphere, colatitude/longitude chart (poles excluded)."""
    if radius <= 0:
        raise ModelDefinitionError("sphere radius must be positive")
    th, ph = sp.symbols("theta phi", real=True)
    r = sp.Float(radius)
    coords = (Coordinate("theta", 0.0, np.pi), Coordinate("phi", 0.0, 2 * np.pi, periodic=True))
    chart = symbolic_chart("polar", coords, (th, ph), sp.diag(r**2, r**2 * sp.sin(th) ** 2))
    pos, jac = _embedding_fn((th, ph), [r * sp.sin(th) * sp.cos(ph), r * sp.sin(th) * sp.sin(ph), r * sp.cos(th)])
    killing = [_rotation_field(chart, pos, jac, w) for w in np.eye(3)]
    return ManifoldModel(
        name="sphere", params={"radius": radius}, chart=chart,
        curvature=lambda x: 1.0 / radius**2,
        seeds=[SeedSpec("equator", "polar", _uniform_circle(np.pi / 2))],
        killing={"polar": killing}, embeddings={"polar": (pos, jac)},
        simply_connected=True,
    )


def _torus_winding(p, q):
    def pts(N):
        i = np.arange(N) / N
        return np.mod(np.column_stack([p * i, q * i]), 1.0)
    return pts


def flat_torus(a1=(1.0, 0.0), a2=(0.0, 1.0)) -> ManifoldModel:
    """R^2 modulo the lattice spanned by a1, a2; chart coordinates in [0, 1)^2."""
    A = np.column_stack([np.asarray(a1, float), np.asarray(a2, float)])
    if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-12:
        raise ModelDefinitionError("torus lattice vectors must be two independent 2-vectors")
    G = A.T @ A
    x, y = sp.symbols("x y", real=True)
    coords = (Coordinate("x", 0.0, 1.0, periodic=True), Coordinate("y", 0.0, 1.0, periodic=True))
    chart = symbolic_chart("lattice", coords, (x, y), sp.Matrix(G.tolist()))
    seeds = [SeedSpec(f"winding_{p}_{q}", "lattice", _torus_winding(p, q)) for p, q in ((1, 0), (0, 1), (1, 1))]
    return ManifoldModel(
        name="torus", params={"a1": list(map(float, a1)), "a2": list(map(float, a2))}, chart=chart,
        curvature=lambda x: 0.0, seeds=seeds,
        killing={"lattice": [_constant_field((1.0, 0.0)), _constant_field((0.0, 1.0))]},
    )


def torus_winding_seed(p: int, q: int) -> SeedSpec:
    return SeedSpec(f"winding_{p}_{q}", "lattice", _torus_winding(p, q))


def _ellipse_meridian(a, c):
    """Constant-speed sampling of theta = pi/2 in a transverse chart."""
    def pts(N):
        s = np.linspace(0.0, 2 * np.pi, 20001)
        speed = np.sqrt(a**2 * np.sin(s) ** 2 + c**2 * np.cos(s) ** 2)
        arc = cumulative_trapezoid(speed, s, initial=0.0)
        target = arc[-1] * np.arange(N) / N
        phi = np.interp(target, arc, s)
        return np.column_stack([np.full(N, np.pi / 2), phi])
    return pts


def ellipsoid(a: float = 2.0, c: float = 1.0) -> ManifoldModel:
    """Ellipsoid of revolution x^2/a^2 + y^2/a^2 + z^2/c^2 = 1.

    Chart ``polar`` has its poles on the symmetry axis.  Charts
    ``transverse_y`` / ``transverse_x`` put the poles on the y / x axis so
    that the meridians in the xz / yz planes avoid chart singularities.
    """
    if a <= 0 or c <= 0:
        raise ModelDefinitionError("ellipsoid semi-axes must be positive")
    th, ph = sp.symbols("theta phi", real=True)
    A, C = sp.Float(a), sp.Float(c)
    s, co = sp.sin, sp.cos
    coords = (Coordinate("theta", 0.0, np.pi), Coordinate("phi", 0.0, 2 * np.pi, periodic=True))
    g_polar = sp.diag(A**2 * co(th) ** 2 + C**2 * s(th) ** 2, A**2 * s(th) ** 2)
    g_tt = A**2 * co(th) ** 2 * co(ph) ** 2 + A**2 * s(th) ** 2 + C**2 * co(th) ** 2 * s(ph) ** 2
    g_tp = (C**2 - A**2) * s(th) * co(th) * s(ph) * co(ph)
    g_pp = s(th) ** 2 * (A**2 * s(ph) ** 2 + C**2 * co(ph) ** 2)
    g_trans = sp.Matrix([[g_tt, g_tp], [g_tp, g_pp]])
    polar = symbolic_chart("polar", coords, (th, ph), g_polar)
    trans_y = symbolic_chart("transverse_y", coords, (th, ph), g_trans)
    trans_x = symbolic_chart("transverse_x", coords, (th, ph), g_trans)
    emb = {
        "polar": _embedding_fn((th, ph), [A * s(th) * co(ph), A * s(th) * s(ph), C * co(th)]),
        "transverse_y": _embedding_fn((th, ph), [A * s(th) * co(ph), A * co(th), C * s(th) * s(ph)]),
        "transverse_x": _embedding_fn((th, ph), [A * co(th), A * s(th) * co(ph), C * s(th) * s(ph)]),
    }
    z_axis = (0.0, 0.0, 1.0)
    killing = {name: [_rotation_field(ch, *emb[name], z_axis)]
               for name, ch in (("polar", polar), ("transverse_y", trans_y), ("transverse_x", trans_x))}
    seeds = [
        SeedSpec("equator", "polar", _uniform_circle(np.pi / 2)),
        SeedSpec("meridian_xz", "transverse_y", _ellipse_meridian(a, c)),
        SeedSpec("meridian_yz", "transverse_x", _ellipse_meridian(a, c)),
    ]
    return ManifoldModel(
        name="ellipsoid", params={"a": a, "c": c}, chart=polar,
        charts={"polar": polar, "transverse_y": trans_y, "transverse_x": trans_x},
        seeds=seeds, killing=killing, embeddings=emb, simply_connected=True,
    )


def surface_of_revolution(profile: str = "2 + cos(u)", u_min: float = 0.0,
                          u_max: float = 2 * np.pi, periodic: bool = True) -> ManifoldModel:
    """Surface with metric du^2 + f(u)^2 dphi^2, u an arclength profile parameter.

    ``profile`` is a sympy-parsable expression in ``u``.  With a periodic
    profile coordinate the surface is a torus of revolution; parallels at
    critical points of f and (for periodic u) meridians are the seeds.
    """
    u, ph = sp.symbols("u phi", real=True)
    f = sp.sympify(profile, locals={"u": u})
    if f.free_symbols - {u}:
        raise ModelDefinitionError(f"profile {profile!r} may only depend on u")
    coords = (Coordinate("u", u_min, u_max, periodic=periodic), Coordinate("phi", 0.0, 2 * np.pi, periodic=True))
    chart = symbolic_chart("profile", coords, (u, ph), sp.diag(1, f**2))
    f_num = sp.lambdify(u, f, "numpy")
    df_num = sp.lambdify(u, sp.diff(f, u), "numpy")

    grid = np.linspace(u_min, u_max, 4001)
    if not periodic:
        grid = grid[1:-1]
    vals = np.broadcast_to(np.asarray(f_num(grid), float), grid.shape)
    if np.any(vals <= 0):
        raise ModelDefinitionError(f"profile {profile!r} must stay positive on the u range")
    dvals = np.broadcast_to(np.asarray(df_num(grid), float), grid.shape)
    crit = []
    for i in range(len(grid) - 1):
        if dvals[i] == 0.0:
            crit.append(grid[i])
        elif dvals[i] * dvals[i + 1] < 0:
            crit.append(brentq(df_num, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    if periodic:
        crit = sorted({round(float(np.mod(v - u_min, u_max - u_min) + u_min), 12) for v in crit})
    seeds = [SeedSpec(f"parallel_{k}", "profile", _uniform_circle_at(uc)) for k, uc in enumerate(crit)]
    if periodic:
        def meridian(N):
            return np.column_stack([u_min + (u_max - u_min) * np.arange(N) / N, np.zeros(N)])
        seeds.append(SeedSpec("meridian", "profile", meridian))
    return ManifoldModel(
        name="revolution",
        params={"profile": profile, "u_min": u_min, "u_max": u_max, "periodic": periodic},
        chart=chart, seeds=seeds, killing={"profile": [_constant_field((0.0, 1.0))]},
        simply_connected=not periodic,
    )


def _uniform_circle_at(u0):
    def pts(N):
        return np.column_stack([np.full(N, u0), 2.0 * np.pi * np.arange(N) / N])
    return pts


CATALOG = {
    "sphere": sphere,
    "torus": flat_torus,
    "ellipsoid": ellipsoid,
    "revolution": surface_of_revolution,
}


def build_model(name: str, **params) -> ManifoldModel:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown model {name!r}; choose from {sorted(CATALOG)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise CatalogError(f"bad parameters for model {name!r}: {exc}") from None
