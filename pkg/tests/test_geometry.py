import numpy as np
import pytest
from hypothesis import given, strategies as st

from fmorph.catalog import catalog
from fmorph.exprlang import parse
from fmorph.errors import NotPositiveDefinite, OutOfDomain, SchemaError, WeightNotPositive
from fmorph.geometry import (
    RiemannianChart, conformal_scale, euclidean, f_laplacian, grad_scalar, half_space, in_domain,
    laplace_beltrami, metric_at, poincare_ball, stereo_sphere,
)

from oracles import expr_fun, fd_grad, fd_hess, mixed_close


def all_charts():
    charts = {}
    for e in catalog():
        for ch in (e.map.source, e.map.target):
            charts[ch.name] = ch
    charts["H3"] = half_space("xyz", name="H3")
    charts["S3"] = stereo_sphere(("x1", "x2", "x3"), name="S3")
    charts["B3"] = poincare_ball("xyz", name="B3")
    charts["R3-squashed"] = RiemannianChart(
        "R3-squashed", ("x", "y", "z"),
        [["1 + x^2", "x*y/4", "0"], ["x*y/4", "2 + sin(z)", "y/5"], ["0", "y/5", "exp(x)"]],
        sample_box=((-1, 1), (-1, 1), (-1, 1)))
    return list(charts.values())


def sample(chart, n, seed=0):
    rng = np.random.default_rng(seed)
    box = np.array(chart.box())
    pts = rng.uniform(box[:, 0], box[:, 1], (20 * n, chart.dim))
    pts = pts[in_domain(chart, pts, 0.05)]
    return pts[:n]


CHARTS = all_charts()
IDS = [c.name for c in CHARTS]


def test_euclidean_is_flat():
    mp = metric_at(euclidean("xyz"), [0.3, -2.0, 5.0])
    assert np.array_equal(mp.g, np.eye(3))
    assert not mp.christoffel.any()


def test_half_space_christoffels():
    mp = metric_at(half_space("xyz"), [0.0, 0.0, 1.0])
    assert np.allclose(mp.g, np.eye(3))
    # index order christoffel[k, i, j] = Gamma^k_ij
    assert mp.christoffel[2, 0, 0] == pytest.approx(1.0)
    assert mp.christoffel[0, 0, 2] == pytest.approx(-1.0)
    assert mp.christoffel[0, 2, 0] == pytest.approx(-1.0)
    assert mp.christoffel[2, 2, 2] == pytest.approx(-1.0)


def test_round_sphere_chart_at_origin():
    mp = metric_at(stereo_sphere(("x1", "x2", "x3")), [0.0, 0.0, 0.0])
    assert np.allclose(mp.g, 4 * np.eye(3))
    assert not mp.dg.any()


@pytest.mark.parametrize("chart", CHARTS, ids=IDS)
def test_inverse_and_symmetry(chart):
    mp = metric_at(chart, sample(chart, 50))
    eye = np.einsum("zij,zjk->zik", mp.g, mp.g_inv)
    assert np.allclose(eye, np.eye(chart.dim), atol=1e-12)
    assert np.array_equal(mp.christoffel, np.swapaxes(mp.christoffel, -1, -2))
    assert np.array_equal(mp.g, np.swapaxes(mp.g, -1, -2))


@pytest.mark.parametrize("chart", CHARTS, ids=IDS)
def test_metric_compatibility(chart):
    mp = metric_at(chart, sample(chart, 100, seed=1))
    # d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
    lower = np.einsum("zlki,zlj->zkij", mp.christoffel, mp.g)
    resid = mp.dg - lower - np.swapaxes(lower, -1, -2)
    assert np.abs(resid).max() <= 1e-9 * (1 + np.abs(mp.dg).max())


@pytest.mark.parametrize("chart", CHARTS, ids=IDS)
def test_metric_derivatives_against_fd(chart):
    m = chart.dim
    for p in sample(chart, 5, seed=2):
        mp = metric_at(chart, p)
        for i in range(m):
            for j in range(m):
                def gij(q, i=i, j=j):
                    return metric_at(chart, np.atleast_2d(q)).g[:, i, j]
                assert mixed_close(mp.dg[:, i, j], fd_grad(gij, p), 1e-6)
                assert mixed_close(mp.d2g[:, :, i, j], fd_hess(gij, p), 1e-4)


@pytest.mark.parametrize("chart", CHARTS, ids=IDS)
def test_christoffel_against_fd_formula(chart):
    for p in sample(chart, 5, seed=3):
        mp = metric_at(chart, p)
        m = chart.dim
        dg = np.array([[fd_grad(lambda q, i=i, j=j: metric_at(chart, np.atleast_2d(q)).g[:, i, j], p)
                        for j in range(m)] for i in range(m)])        # dg[i, j, k] = d_k g_ij
        first = 0.5 * (np.einsum("jlk->klj", dg) + np.einsum("ilk->ikl", dg) - dg)  # [i, j, l]
        gamma = np.einsum("kl,ijl->kij", mp.g_inv, first)
        assert mixed_close(mp.christoffel, gamma, 1e-6)


@pytest.mark.parametrize("u, p, expected", [
    ("z", [0.1, 0.2, 0.3], [0, 0, 1]),
    ("x^2+y^2", [1.0, 2.0, 0.0], [2, 4, 0]),
])
def test_grad_euclidean(u, p, expected):
    assert np.allclose(grad_scalar(euclidean("xyz"), u, p), expected)


def test_grad_half_space():
    assert np.allclose(grad_scalar(half_space("xyz"), "z", [0.0, 0.0, 2.0]), [0, 0, 4])


@pytest.mark.parametrize("chart, u, value", [
    (euclidean("xyz"), "x^2+y^2+z^2", 6.0),
    (euclidean("xy"), "x^2-y^2", 0.0),
    (half_space("xyz"), "log(z)", -2.0),
    (half_space("xy"), "log(y)", -1.0),
])
def test_laplace_beltrami_values(chart, u, value):
    pts = sample(chart, 10)
    assert np.allclose(laplace_beltrami(chart, u, pts), value, atol=1e-12)


@given(st.integers(0, 10_000))
def test_flat_laplacian_matches_fd(s):
    rng = np.random.default_rng(s)
    p = rng.uniform(-1, 1, 3)
    u = "sin(x*y) + z^3*exp(x) - log(2 + y^2)"
    fd = np.trace(fd_hess(expr_fun(parse(u), "xyz"), p))
    assert abs(laplace_beltrami(euclidean("xyz"), u, p) - fd) <= 1e-7 * (1 + abs(fd))


def test_f_laplacian_cases():
    r3 = euclidean("xyz")
    pts = sample(r3, 20)
    lb = laplace_beltrami(r3, "x^2*y + z", pts)
    assert np.array_equal(f_laplacian(r3, "1", "x^2*y + z", pts), lb)
    assert np.allclose(f_laplacian(r3, "exp(z)", "x", pts), 0.0)
    assert np.allclose(f_laplacian(r3, "exp(z)", "z", pts), np.exp(pts[:, 2]))
    with pytest.raises(WeightNotPositive):
        f_laplacian(r3, "z - 10", "x", pts)


@pytest.mark.parametrize("chart", CHARTS[:6], ids=IDS[:6])
def test_constant_weight_scales_laplacian(chart):
    pts = sample(chart, 20, seed=4)
    u = " + ".join(chart.coords) + f" + {chart.coords[0]}^2"
    a = f_laplacian(chart, "2.5", u, pts)
    b = 2.5 * laplace_beltrami(chart, u, pts)
    assert np.allclose(a, b, rtol=4e-16, atol=0)


def test_conformal_scale_gives_round_sphere():
    r3 = euclidean(("x1", "x2", "x3"))
    f = "2/(1+x1^2+x2^2+x3^2)"
    scaled = conformal_scale(r3, f"({f})^2")
    s3 = stereo_sphere(("x1", "x2", "x3"))
    pts = sample(s3, 30)
    a, b = metric_at(scaled, pts), metric_at(s3, pts)
    assert np.allclose(a.g, b.g, atol=1e-14) and np.allclose(a.christoffel, b.christoffel, atol=1e-13)
    assert np.array_equal(metric_at(conformal_scale(r3, "1"), pts).g, metric_at(r3, pts).g)


def test_conformal_scale_gives_hyperbolic_ball():
    d3 = euclidean("xyz", domain="1 - x^2 - y^2 - z^2")
    scaled = conformal_scale(d3, "(2/(1-x^2-y^2-z^2))^2")
    ball = poincare_ball("xyz")
    pts = sample(ball, 30)
    assert np.allclose(metric_at(scaled, pts).g, metric_at(ball, pts).g, rtol=1e-14)


def test_domain_and_definiteness_errors():
    with pytest.raises(OutOfDomain):
        metric_at(half_space("xyz"), [0.0, 0.0, -1.0])
    bad = RiemannianChart("bad", ("x", "y"), [["1", "2"], ["2", "1"]])
    with pytest.raises(NotPositiveDefinite):
        metric_at(bad, [0.0, 0.0])


@pytest.mark.parametrize("block", [
    {"name": "a", "coords": ["x", "x"], "metric": [["1", "0"], ["0", "1"]]},
    {"name": "a", "coords": ["x", "y"], "metric": [["1", "0"]]},
    {"name": "a", "coords": ["x"], "metric": [["q"]]},
    {"coords": ["x"], "metric": [["1"]]},
])
def test_chart_validation(block):
    with pytest.raises(SchemaError):
        RiemannianChart.from_dict(block)


@pytest.mark.parametrize("chart", CHARTS, ids=IDS)
def test_chart_round_trip(chart):
    assert RiemannianChart.from_dict(chart.to_dict()) == chart
