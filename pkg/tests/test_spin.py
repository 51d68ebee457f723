import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmorph.errors import BlowUp, NonPositiveWeight, SchemaError, StepUnderflow
from fmorph.spin import (
    MinimizeOptions, SpinField, default_fixed, evolve, f_energy, field_from_config, llg_rhs, minimize, residual,
    tangential_residual,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load_config(name):
    return json.loads((CONFIGS / name).read_text())


def random_field(rng, shape, boundary="dirichlet", spacing=None):
    spacing = spacing or tuple(rng.uniform(0.3, 1.5) for _ in shape)
    f = rng.uniform(0.5, 2.0, shape)
    return SpinField(rng.normal(size=shape + (3,)), f, spacing, boundary)


def raw_energy(field, u):
    # energy of an unnormalized field, evaluated without projecting back onto the sphere
    probe = field.replace(field.u)
    probe.u = u
    return f_energy(probe)


def fd_energy_gradient(field, eps=1e-2):
    # the energy is quadratic in u, so central differences are exact up to roundoff
    g = np.zeros_like(field.u)
    for idx in np.ndindex(field.u.shape):
        up, dn = field.u.copy(), field.u.copy()
        up[idx] += eps
        dn[idx] -= eps
        g[idx] = (raw_energy(field, up) - raw_energy(field, dn)) / (2 * eps)
    return g


def test_constant_field():
    u = np.tile([0.0, 0.6, 0.8], (5, 4, 1))
    fld = SpinField(u, np.full((5, 4), 2.0), (0.5, 0.25))
    assert f_energy(fld) == 0.0
    assert not residual(fld).any() and not llg_rhs(fld).any()


def test_three_node_chain():
    fld = SpinField([[1, 0, 0], [0, 1, 0], [1, 0, 0]], np.ones(3), (1.0,))
    assert f_energy(fld) == 2.0
    assert fld.fixed.tolist() == [True, False, True]
    # r at the middle node: (e1 - e2) + (e1 - e2)
    assert np.array_equal(residual(fld)[1], [2.0, -2.0, 0.0])
    assert np.array_equal(tangential_residual(fld)[0][1], [2.0, 0.0, 0.0])


def test_energy_linear_in_f(rng):
    fld = random_field(rng, (6, 5))
    double = SpinField(fld.u, 2 * fld.f, fld.spacing)
    assert f_energy(double) == pytest.approx(2 * f_energy(fld), rel=1e-14)


@pytest.mark.parametrize("shape, boundary", [((7,), "dirichlet"), ((6, 5), "dirichlet"), ((6, 5), "periodic"),
                                             ((8,), "periodic")])
def test_gradient_is_minus_volume_times_residual(rng, shape, boundary):
    fld = random_field(rng, shape, boundary)
    g = fd_energy_gradient(fld)
    assert np.allclose(g, -fld.volume * residual(fld), atol=1e-10)


def test_tangential_gradient_on_small_grid(rng):
    fld = random_field(rng, (3, 3), "periodic")
    g = fd_energy_gradient(fld)
    gt = g - np.sum(g * fld.u, axis=-1, keepdims=True) * fld.u
    rt, _ = tangential_residual(fld)
    assert np.abs(gt + fld.volume * rt).max() <= 1e-10


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["dirichlet", "periodic"]))
def test_llg_rhs_norm_matches_tangential_residual(s, boundary):
    fld = random_field(np.random.default_rng(s), (5, 6), boundary)
    rhs = llg_rhs(fld)
    rt, _ = tangential_residual(fld)
    assert np.abs(np.sum(rhs * fld.u, axis=-1)).max() <= 1e-12
    assert np.abs(np.linalg.norm(rhs, axis=-1) - np.linalg.norm(rt, axis=-1)).max() <= 1e-12


def _continuum_error(n):
    h = 2 * np.pi / n
    x = np.arange(n) * h
    f = 1.5 + 0.5 * np.cos(x)
    u = np.stack([np.cos(x), np.sin(x), np.zeros(n)], axis=-1)
    fld = SpinField(u, f, (h,), "periodic")
    # f u'' + f' u' with u'' = -u, u' = (-sin, cos, 0)
    exact = -f[:, None] * u + (-0.5 * np.sin(x))[:, None] * np.stack([-np.sin(x), np.cos(x), 0 * x], axis=-1)
    return np.abs(residual(fld) - exact).max()


def test_residual_is_second_order():
    errs = [_continuum_error(n) for n in (16, 32, 64)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.6 < r < 4.4 for r in ratios), ratios


def test_default_fixed():
    assert default_fixed((4,), "periodic").sum() == 0
    assert default_fixed((4, 5), "dirichlet").sum() == 4 * 5 - 2 * 3


def test_minimize_monotone_and_converges():
    cfg = load_config("disk_f_one.json")
    fld = field_from_config(cfg)
    out, trace = minimize(fld, MinimizeOptions(tol=1e-6))
    assert trace.residual[-1] <= 1e-6
    assert np.all(np.diff(trace.energy) <= 0)
    # with f = 1 and a constant boundary value the minimizer is the constant map
    assert trace.energy[-1] <= 1e-9
    assert np.array_equal(out.u[out.fixed], fld.u[fld.fixed])


def test_minimize_constant_start():
    fld = SpinField(np.tile([0, 0, 1.0], (4, 4, 1)), np.ones((4, 4)), (1.0, 1.0))
    _, trace = minimize(fld)
    assert len(trace) == 1 and trace.iteration == [0]


def test_minimize_step_underflow(rng):
    fld = random_field(rng, (5, 5))
    with pytest.raises(StepUnderflow):
        minimize(fld, MinimizeOptions(step0=1e-20, min_step=1e-18, armijo_c=2.0))


def test_evolve_stationary_field():
    fld = SpinField(np.tile([1.0, 0, 0], (6, 6, 1)), np.ones((6, 6)), (0.5, 0.5), "periodic")
    out, trace = evolve(fld, 0.01, 10)
    assert np.array_equal(out.u, fld.u) and len(trace) == 11


def test_evolve_conserves_energy_and_norm():
    cfg = load_config("precession_periodic.json")
    fld = field_from_config(cfg)
    out, trace = evolve(fld, cfg["evolve"]["dt"], cfg["evolve"]["steps"])
    e = np.array(trace.energy)
    assert np.abs(e - e[0]).max() <= 1e-6 * e[0]
    assert np.abs(np.linalg.norm(out.u, axis=-1) - 1).max() <= 1e-12


def test_evolve_blowup():
    cfg = load_config("precession_periodic.json")
    with pytest.raises(BlowUp) as info:
        evolve(field_from_config(cfg), 5.0, 10)
    assert info.value.step >= 1


def test_trace_csv_deterministic():
    cfg = load_config("disk_f_one.json")
    a = minimize(field_from_config(cfg), MinimizeOptions(max_iter=30))[1].to_csv()
    b = minimize(field_from_config(cfg), MinimizeOptions(max_iter=30))[1].to_csv()
    assert a == b
    assert a.splitlines()[0] == "iter,energy,residual,step" and len(a.splitlines()) == 32


def test_disk_config_geometry():
    fld = field_from_config(load_config("disk_f_coupled.json"))
    assert fld.shape == (33, 33) and fld.spacing == (0.0625, 0.0625)
    assert fld.fixed[16, 16] == False and fld.fixed[0, 0] and fld.fixed[16, 0]  # noqa: E712
    assert np.array_equal(fld.u[fld.fixed], np.tile([0, 0, 1.0], (fld.fixed.sum(), 1)))
    assert fld.f[16, 16] == 2.0


def test_field_json_round_trip(rng):
    fld = random_field(rng, (3, 4), "periodic")
    back = SpinField.from_dict(json.loads(fld.to_json()))
    assert np.array_equal(back.u, fld.u) and np.array_equal(back.f, fld.f)
    assert np.array_equal(back.fixed, fld.fixed) and back.spacing == fld.spacing


@pytest.mark.parametrize("cfg, err", [
    ({}, SchemaError),
    ({"grid": {"nx": 5}, "domain": "torus"}, SchemaError),
    ({"grid": {"nx": 5}, "boundary": {"type": "neumann"}}, SchemaError),
    ({"grid": {"nx": 5}, "domain": "disk"}, SchemaError),
    ({"grid": {"nx": 5}, "init": "spiral"}, SchemaError),
    ({"grid": {"nx": 5}, "f": "x"}, NonPositiveWeight),
    ({"grid": {"nx": 5}, "init": ["x", "0", "0"]}, SchemaError),
])
def test_config_errors(cfg, err):
    with pytest.raises(err):
        field_from_config(cfg)


def test_field_validation():
    with pytest.raises(SchemaError):
        SpinField(np.zeros((3, 2)), np.ones(3), (1.0,))
    with pytest.raises(NonPositiveWeight):
        SpinField(np.ones((3, 3)), np.array([1.0, 0.0, 1.0]), (1.0,))


@pytest.mark.parametrize("n", [16, 32])
def test_great_circle_is_stationary(n):
    # with f = 1 the discrete Laplacian of a great circle is parallel to u, so the right side vanishes
    h = 2 * np.pi / n
    x = np.arange(n) * h
    fld = SpinField(np.stack([np.cos(x), np.sin(x), 0 * x], axis=-1), np.ones(n), (h,), "periodic")
    assert np.abs(llg_rhs(fld)).max() <= 1e-12
    assert tangential_residual(fld)[1] <= 1e-12


def test_energy_drift_unit_coupling():
    cfg = {"grid": {"nx": 12, "ny": 12}, "boundary": {"type": "periodic"}, "f": "1",
           "init": ["cos(x)", "sin(x)*cos(y)", "sin(y)"]}
    fld = field_from_config(cfg)
    out, trace = evolve(fld, 1e-3, 1000)
    e = np.array(trace.energy)
    assert np.abs(e - e[0]).max() <= 1e-6 * e[0]
    assert np.abs(np.linalg.norm(out.u, axis=-1) - 1).max() <= 1e-12


def test_unit_coupling_disk_reaches_north_pole():
    cfg = load_config("disk_f_one.json")
    out, _ = minimize(field_from_config(cfg))
    assert np.abs(out.u - [0.0, 0.0, 1.0]).max() <= 1e-5
