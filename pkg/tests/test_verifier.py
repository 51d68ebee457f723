import json

import numpy as np
import pytest

from fmorph.catalog import (
    MORPHISM, CatalogEntry, catalog, catalog_entry, euclid_to_hyperbolic, hopf_map, phi_map, poly_cyl,
    projection_map, psi_map, radial_projection,
)
from fmorph.errors import NotHWC, PreconditionFailed, SamplerExhausted
from fmorph.geometry import euclidean, in_domain
from fmorph.mapcalc import MapSpec
from fmorph.problem import from_dict
from fmorph.verifier import (
    SamplerConfig, classify, morphism_pullback_test, polynomial_hwc_check, sample_points, two_weight_test,
    verdict_matches,
)

ENTRIES = catalog()


def test_catalog_shape():
    assert [e.key for e in ENTRIES] == [
        "ex1_projection", "ex1_psi", "ex1_phi", "mobius_inversion", "euclid_to_hyperbolic", "hopf_r3",
        "radial_projection", "poly_cyl"]


@pytest.mark.parametrize("entry", ENTRIES, ids=[e.key for e in ENTRIES])
def test_catalog_round_trip(entry):
    doc = json.loads(json.dumps(entry.to_dict()))
    mp = from_dict(doc).maps[0]
    assert mp == entry.map
    assert doc["maps"][0]["expected"] == entry.expected


@pytest.mark.parametrize("entry", ENTRIES, ids=[e.key for e in ENTRIES])
def test_catalog_verdicts(entry):
    v = classify(entry.map, SamplerConfig(count=100, seed=11))
    assert verdict_matches(v, entry.expected), v.aggregate
    a = v.aggregate
    assert a["is_f_harmonic_morphism"] == (a["is_f_harmonic"] and a["is_hwc"])


def test_sampler_respects_domains():
    mp = euclid_to_hyperbolic()
    pts = sample_points(mp, 300, seed=1)
    assert pts.shape == (300, 3)
    assert np.all(in_domain(mp.source, pts, 1e-3)) and np.all(in_domain(mp.target, mp.image(pts), 1e-3))
    assert np.array_equal(pts, sample_points(mp, 300, seed=1))
    assert not np.array_equal(pts, sample_points(mp, 300, seed=2))


def test_sampler_exhausted():
    empty = MapSpec(euclidean("xyz", domain="-1 - x^2"), euclidean("XY"), ("x", "y"))
    with pytest.raises(SamplerExhausted):
        sample_points(empty, 10, seed=0, max_rounds=3)


def test_sampler_skips_points_where_map_is_undefined():
    mp = MapSpec(euclidean("xy"), euclidean("XY"), ("log(x)", "y"))
    pts = sample_points(mp, 50, seed=0)
    assert np.all(pts[:, 0] > 0)


def test_hopf_is_morphism_and_lambda():
    v = classify(hopf_map(), SamplerConfig(count=200, seed=0))
    a = v.aggregate
    assert a["is_f_harmonic_morphism"] and a["max_f_tension_residual"] <= 1e-8
    pts = np.array([p["point"] for p in v.points])
    lam = np.array([p["lambda_sq"] for p in v.points])
    assert np.allclose(lam, 16 / (1 + np.sum(pts ** 2, axis=1)) ** 2, rtol=1e-12)


def test_hopf_with_non_vertical_weight_fails():
    v = classify(hopf_map().with_weight("exp(x1)"), SamplerConfig(count=50))
    assert not v.aggregate["is_f_harmonic"] and v.aggregate["is_hwc"]


def test_homothety_and_fibres_in_verdicts():
    a = classify(projection_map()).aggregate
    assert a["is_horizontally_homothetic"] and a["fibers_minimal"]
    a = classify(radial_projection()).aggregate
    assert a["fibers_minimal"]
    assert classify(psi_map()).aggregate["is_horizontally_homothetic"] is None


def test_constant_map_is_degenerate_morphism():
    const = MapSpec(euclidean("xyz"), euclidean("XY"), ("1", "2"), "1", "const")
    a = classify(const, SamplerConfig(count=20)).aggregate
    assert a["degenerate"] and a["is_f_harmonic_morphism"]
    assert a["lambda_stats"]["max"] == 0.0


def test_verdict_serialization_deterministic():
    cfg = SamplerConfig(count=40, seed=9)
    a, b = classify(hopf_map(), cfg), classify(hopf_map(), cfg)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    doc = json.loads(a.to_json())
    assert set(doc) == {"map", "points", "aggregate", "tolerances", "seed", "count"}
    assert doc["points"][0]["point"] == a.points[0]["point"]
    header = a.to_csv().splitlines()[0]
    assert header == "x0,x1,x2,f_tension_residual,hwc_residual,lambda_sq"


@pytest.mark.parametrize("key", ["ex1_projection", "mobius_inversion", "euclid_to_hyperbolic", "hopf_r3",
                                 "radial_projection", "poly_cyl"])
def test_pullback_identity(key):
    out = morphism_pullback_test(catalog_entry(key).map, 10, SamplerConfig(count=60, seed=3))
    assert out["max_identity_residual"] <= 1e-8
    assert out["max_tau_term"] <= 1e-8
    assert len(out["per_fn"]) == 10


def test_pullback_identity_with_affine_function():
    mp = euclid_to_hyperbolic()
    out = morphism_pullback_test(mp, ["2*X - 3*Z + 1"], SamplerConfig(count=50))
    assert out["max_identity_residual"] <= 1e-10


def test_pullback_identity_holds_without_f_harmonicity():
    # a non-f-harmonic weight makes du(tau_f) nonzero but the identity still holds
    mp = radial_projection().with_weight("exp(x)")
    out = morphism_pullback_test(mp, 5, SamplerConfig(count=40))
    assert out["max_identity_residual"] <= 1e-8 and out["max_tau_term"] > 1e-3


def test_pullback_refuses_non_hwc():
    with pytest.raises(NotHWC):
        morphism_pullback_test(phi_map(), 3, SamplerConfig(count=10))
    with pytest.raises(PreconditionFailed):
        morphism_pullback_test(MapSpec(euclidean("xyz"), euclidean("XY"), ("x", "y")), 3)


@pytest.mark.parametrize("mp, f1, f2", [
    (radial_projection(), "1 + x^2 + y^2 + z^2", "exp(sqrt(x^2 + y^2 + z^2))"),
    (projection_map(), "exp(z)", "exp(2*z)"),
    (radial_projection(), "1 + x^2 + y^2 + z^2", "1 + x^2 + y^2 + z^2"),
])
def test_two_weight_passes(mp, f1, f2):
    out = two_weight_test(mp, f1, f2, SamplerConfig(count=100))
    assert out["passed"]
    if f1 == f2:
        assert out["max_norm"] == 0.0


def test_two_weight_precondition():
    with pytest.raises(PreconditionFailed):
        two_weight_test(projection_map(), "exp(z)", "exp(x)", SamplerConfig(count=20))


@pytest.mark.parametrize("mp, expected", [
    (poly_cyl(), {"is_polynomial": True, "is_hwc": True, "is_harmonic": True, "holds": True}),
    (psi_map(), {"is_polynomial": True, "is_hwc": False, "is_harmonic": True, "holds": True}),
    (projection_map(), {"is_polynomial": True, "is_hwc": True, "is_harmonic": True, "holds": True}),
    (poly_cyl("z^3"), {"is_polynomial": True, "is_hwc": True, "is_harmonic": True, "holds": True}),
])
def test_polynomial_hwc(mp, expected):
    assert polynomial_hwc_check(mp, SamplerConfig(count=50)) == expected


def test_verdict_mismatch_detected():
    entry = CatalogEntry("wrong", psi_map(), dict(MORPHISM))
    assert not verdict_matches(classify(entry.map, SamplerConfig(count=20)), entry.expected)


def test_round_hopf_constant_weight_passes_and_nonconstant_fails():
    s3 = hopf_map(round_source=True)
    cfg = SamplerConfig(count=50, seed=2)
    assert classify(s3.with_weight("3"), cfg).aggregate["is_f_harmonic_morphism"]
    bent = classify(s3.with_weight("2 + x1"), cfg).aggregate
    assert bent["is_hwc"] and not bent["is_f_harmonic"]
