import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from closed_geodesics import manifold_models as mm
from closed_geodesics.errors import (CatalogError, DomainError, ModelDefinitionError,
                                     UnsupportedDimensionError)


def random_points(chart, rng, count):
    """Uniform points in a chart, keeping a margin from non-periodic edges."""
    lo = np.array([c.lo for c in chart.coords])
    hi = np.array([c.hi for c in chart.coords])
    margin = np.array([0.0 if c.periodic else 0.02 * (c.hi - c.lo) for c in chart.coords])
    return rng.uniform(lo + margin, hi - margin, size=(count, chart.dim))


def embedding_oracle(exprs, symbols):
    """First and second fundamental forms of an embedded surface, built independently with sympy."""
    X = sp.Matrix(exprs)
    J = X.jacobian(sp.Matrix(symbols))
    first = sp.lambdify(symbols, J.T * J, "numpy")
    u, v = symbols
    normal = J[:, 0].cross(J[:, 1])
    second = sp.Matrix(2, 2, lambda i, j: sp.diff(X, symbols[i], symbols[j]).dot(normal))
    det_first = (J.T * J).det()
    # K = det II / det I with an unnormalized normal, hence the extra |n|^2 = det I
    K = sp.lambdify(symbols, second.det() / det_first**2, "numpy")
    return first, K


TH, PH = sp.symbols("theta phi", real=True)


def ellipsoid_embedding(a, c, chart):
    s, co = sp.sin, sp.cos
    return {
        "polar": [a * s(TH) * co(PH), a * s(TH) * s(PH), c * co(TH)],
        "transverse_y": [a * s(TH) * co(PH), a * co(TH), c * s(TH) * s(PH)],
        "transverse_x": [a * co(TH), a * s(TH) * co(PH), c * s(TH) * s(PH)],
    }[chart]


class TestCatalog:
    def test_names(self):
        assert set(mm.CATALOG) == {"sphere", "torus", "ellipsoid", "revolution"}

    def test_unknown_model(self):
        with pytest.raises(CatalogError, match="unknown model"):
            mm.build_model("klein_bottle")

    def test_bad_parameter_name(self):
        with pytest.raises(CatalogError):
            mm.build_model("sphere", radius=1.0, spin=3)

    @pytest.mark.parametrize("name, params", [
        ("sphere", {"radius": -1.0}), ("ellipsoid", {"a": 0.0}),
        ("torus", {"a1": (1.0, 0.0), "a2": (2.0, 0.0)}), ("revolution", {"profile": "cos(u)"}),
        ("revolution", {"profile": "2 + cos(u) + phi"}),
    ])
    def test_invalid_parameters(self, name, params):
        with pytest.raises(ModelDefinitionError):
            mm.build_model(name, **params)

    def test_unknown_chart(self):
        with pytest.raises(CatalogError):
            mm.build_model("sphere").get_chart("stereographic")

    def test_seed_ids(self):
        assert [s.seed_id for s in mm.build_model("torus").seeds] == ["winding_1_0", "winding_0_1", "winding_1_1"]
        assert [s.seed_id for s in mm.build_model("ellipsoid").seeds] == ["equator", "meridian_xz", "meridian_yz"]
        rev = [s.seed_id for s in mm.build_model("revolution").seeds]
        assert rev == ["parallel_0", "parallel_1", "meridian"]

    def test_revolution_parallels_at_profile_extrema(self):
        model = mm.build_model("revolution")
        u0 = [s.points(8)[0, 0] for s in model.seeds[:2]]
        assert u0 == pytest.approx([0.0, np.pi], abs=1e-12)


class TestMetric:
    def test_sphere_equator(self):
        chart = mm.build_model("sphere", radius=2.0).chart
        np.testing.assert_allclose(mm.metric_at(chart, [np.pi / 2, 1.0]), np.diag([4.0, 4.0]), atol=1e-15)

    def test_torus_lattice_gram(self):
        chart = mm.build_model("torus", a1=(2.0, 0.0), a2=(1.0, 3.0)).chart
        np.testing.assert_allclose(mm.metric_at(chart, [0.3, 0.7]), [[4.0, 2.0], [2.0, 10.0]])

    @pytest.mark.parametrize("name", list(mm.CATALOG))
    def test_symmetric_positive_definite(self, name, rng):
        model = mm.build_model(name)
        for chart in model.charts.values():
            for x in random_points(chart, rng, 1000 // len(model.charts)):
                g = mm.metric_at(chart, x)
                assert np.array_equal(g, g.T)
                assert np.linalg.eigvalsh(g)[0] > 0

    @pytest.mark.parametrize("chart_name", ["polar", "transverse_y", "transverse_x"])
    def test_ellipsoid_first_fundamental_form(self, chart_name, rng):
        a, c = 2.0, 1.0
        chart = mm.build_model("ellipsoid", a=a, c=c).get_chart(chart_name)
        first, _ = embedding_oracle(ellipsoid_embedding(a, c, chart_name), (TH, PH))
        for x in random_points(chart, rng, 50):
            np.testing.assert_allclose(chart.metric(x), np.array(first(*x), float), rtol=1e-12, atol=1e-12)

    def test_periodic_wrap(self, rng):
        chart = mm.build_model("revolution").chart
        x = random_points(chart, rng, 20)
        shifted = x + np.array([2 * np.pi, -4 * np.pi])
        np.testing.assert_allclose(chart.metric(chart.wrap(shifted)), chart.metric(x), atol=1e-12)

    @pytest.mark.parametrize("point", [[0.0, 1.0], [np.pi, 1.0], [-0.1, 0.0], [4.0, 0.0]])
    def test_sphere_pole_outside_chart(self, point):
        with pytest.raises(DomainError):
            mm.metric_at(mm.build_model("sphere").chart, point)

    def test_wrong_point_shape(self):
        with pytest.raises(DomainError):
            mm.metric_at(mm.build_model("sphere").chart, [1.0, 2.0, 3.0])

    def test_indefinite_metric_rejected(self):
        x, y = sp.symbols("x y", real=True)
        coords = (mm.Coordinate("x", 0.0, 1.0, periodic=True), mm.Coordinate("y", 0.0, 1.0, periodic=True))
        chart = mm.symbolic_chart("bad", coords, (x, y), sp.diag(1, -1))
        with pytest.raises(ModelDefinitionError, match="positive definite"):
            mm.metric_at(chart, [0.5, 0.5])


class TestChristoffel:
    def test_flat_torus_vanishes(self):
        chart = mm.build_model("torus", a1=(1.0, 0.5), a2=(0.0, 2.0)).chart
        assert np.all(mm.christoffel_at(chart, [0.2, 0.9]) == 0.0)

    @pytest.mark.parametrize("theta", [np.pi / 2, np.pi / 3, 1.0])
    def test_sphere_closed_form(self, theta):
        G = mm.christoffel_at(mm.build_model("sphere").chart, [theta, 0.4])
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -np.sin(theta) * np.cos(theta)
        expected[1, 0, 1] = expected[1, 1, 0] = np.cos(theta) / np.sin(theta)
        np.testing.assert_allclose(G, expected, atol=1e-14)

    def test_symmetric_lower_indices(self, rng):
        chart = mm.build_model("ellipsoid").get_chart("transverse_x")
        G = mm.christoffel_at(chart, random_points(chart, rng, 1)[0])
        np.testing.assert_allclose(G, np.swapaxes(G, 1, 2), atol=1e-14)

    @pytest.mark.parametrize("name", ["ellipsoid", "revolution", "sphere"])
    def test_finite_difference_fallback(self, name, rng):
        model = mm.build_model(name)
        for chart in model.charts.values():
            fd = chart.without_derivs()
            assert not fd.has_analytic_derivs
            for x in random_points(chart, rng, 20):
                exact = mm.christoffel_at(chart, x)
                approx = mm.christoffel_at(fd, x)
                assert np.max(np.abs(exact - approx)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


class TestCurvature:
    @pytest.mark.parametrize("method", ["auto", "brioschi"])
    def test_sphere(self, method, rng):
        model = mm.build_model("sphere", radius=2.0)
        for x in random_points(model.chart, rng, 10):
            assert mm.gaussian_curvature_at(model, x, method=method) == pytest.approx(0.25, abs=1e-10)

    @pytest.mark.parametrize("method", ["auto", "brioschi"])
    def test_flat_torus(self, method):
        model = mm.build_model("torus", a1=(1.0, 0.3), a2=(0.2, 1.5))
        assert mm.gaussian_curvature_at(model, [0.1, 0.8], method=method) == pytest.approx(0.0, abs=1e-12)

    def test_revolution_profile(self, rng):
        model = mm.build_model("revolution")
        for x in random_points(model.chart, rng, 20):
            expected = np.cos(x[0]) / (2 + np.cos(x[0]))
            assert mm.gaussian_curvature_at(model, x) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("chart_name", ["polar", "transverse_y", "transverse_x"])
    def test_ellipsoid_second_fundamental_form(self, chart_name, rng):
        a, c = 2.0, 1.0
        model = mm.build_model("ellipsoid", a=a, c=c)
        _, K = embedding_oracle(ellipsoid_embedding(a, c, chart_name), (TH, PH))
        chart = model.get_chart(chart_name)
        for x in random_points(chart, rng, 10):
            got = mm.gaussian_curvature_at(model, x, chart=chart_name)
            assert got == pytest.approx(float(K(*x)), rel=1e-8)

    def test_ellipsoid_curvature_positive_and_bounded(self, rng):
        # on an oblate spheroid K ranges from c^2/a^4 (poles) to 1/c^2 (equator)
        a, c = 2.0, 1.0
        model = mm.build_model("ellipsoid", a=a, c=c)
        ks = [mm.gaussian_curvature_at(model, x) for x in random_points(model.chart, rng, 50)]
        assert min(ks) >= c**2 / a**4 - 1e-12
        assert max(ks) <= 1 / c**2 + 1e-12
        assert mm.gaussian_curvature_at(model, [np.pi / 2, 0.0]) == pytest.approx(1 / c**2, rel=1e-10)
        near_pole = mm.gaussian_curvature_at(model, [1e-4, 0.0])
        assert near_pole == pytest.approx(c**2 / a**4, rel=1e-6)

    def test_dimension_three_unsupported(self):
        x, y, z = sp.symbols("x y z", real=True)
        coords = tuple(mm.Coordinate(s, 0.0, 1.0, periodic=True) for s in "xyz")
        chart = mm.symbolic_chart("flat3", coords, (x, y, z), sp.eye(3))
        model = mm.ManifoldModel("flat3", {}, chart)
        with pytest.raises(UnsupportedDimensionError):
            mm.gaussian_curvature_at(model, [0.1, 0.2, 0.3])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            mm.gaussian_curvature_at(mm.build_model("sphere"), [1.0, 1.0], method="gauss")


class TestKillingFields:
    @pytest.mark.parametrize("name, chart_name", [
        ("sphere", "polar"), ("ellipsoid", "polar"), ("ellipsoid", "transverse_y"),
        ("ellipsoid", "transverse_x"), ("revolution", "profile"), ("torus", "lattice"),
    ])
    def test_metric_invariant_along_fields(self, name, chart_name, rng):
        """Lie derivative of g along a Killing field vanishes: X^k d_k g_ab + g_kb d_a X^k + g_ak d_b X^k = 0."""
        model = mm.build_model(name)
        chart = model.get_chart(chart_name)
        h = 1e-6
        for x in random_points(chart, rng, 5):
            g, dg = chart.metric(x), chart.metric_derivs(x)
            for f in model.killing.get(chart_name, []):
                X = f(x[None])[0]
                dX = np.column_stack([(f((x + h * e)[None])[0] - f((x - h * e)[None])[0]) / (2 * h)
                                      for e in np.eye(2)])
                lie = np.einsum("k,abk->ab", X, dg) + dX.T @ g + g @ dX
                assert np.max(np.abs(lie)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_spheroid_equator_metric(a, c):
    model = mm.build_model("ellipsoid", a=a, c=c)
    g = mm.metric_at(model.chart, [np.pi / 2, 0.7])
    np.testing.assert_allclose(g, np.diag([c**2, a**2]), rtol=1e-12)
