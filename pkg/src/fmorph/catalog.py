"""Built-in example maps with the weights that make them f-harmonic.

Each entry records the expected classification booleans; ``verifier``
checks computed verdicts against them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .exprlang import Expr, as_expr, parse, substitute
from .geometry import RiemannianChart, euclidean, half_space, stereo_sphere
from .mapcalc import MapSpec

MORPHISM = {"is_f_harmonic": True, "is_hwc": True, "is_f_harmonic_morphism": True}
NOT_HWC = {"is_f_harmonic": True, "is_hwc": False, "is_f_harmonic_morphism": False}


@dataclass
class CatalogEntry:
    key: str
    map: MapSpec
    expected: dict
    provenance: str = ""
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        charts = {self.map.source.name: self.map.source.to_dict(),
                  self.map.target.name: self.map.target.to_dict()}
        return {
            "schema": "fmorph/1",
            "charts": list(charts.values()),
            "maps": [dict(self.map.to_dict(), expected=dict(self.expected))],
            "provenance": self.provenance,
            "params": dict(self.params),
        }


def _r2(coords) -> Expr:
    total = None
    for c in coords:
        total = as_expr(c) ** 2 if total is None else total + as_expr(c) ** 2
    return total


def sphere_to_stereo(u1, u2, u3):
    """Stereographic projection of the unit sphere from (0, 0, 1)."""
    d = 1 - u3
    return (u1 / d, u2 / d)


def stereo_to_sphere(s1, s2):
    s1, s2 = as_expr(s1), as_expr(s2)
    d = 1 + s1 ** 2 + s2 ** 2
    return (2 * s1 / d, 2 * s2 / d, (s1 ** 2 + s2 ** 2 - 1) / d)


def s2_chart(name="S2") -> RiemannianChart:
    return stereo_sphere(("s1", "s2"), name=name)


# ---------------------------------------------------------------------------

def projection_map() -> MapSpec:
    r3 = euclidean("xyz", name="R3")
    return MapSpec(r3, euclidean(("X", "Y"), name="R2"), ("x", "y"), "exp(z)", "ex1_projection")


def psi_map() -> MapSpec:
    r3 = euclidean("xyz", name="R3")
    return MapSpec(r3, euclidean(("X", "Y"), name="R2"), ("3*x", "x*y"), "exp(z)", "ex1_psi")


def phi_map() -> MapSpec:
    r3 = euclidean("xyz", name="R3")
    return MapSpec(r3, euclidean(("X", "Y"), name="R2"), ("x", "y+z"), "exp(y-z)", "ex1_phi")


def mobius_inversion(m: int = 3, r: float = 1.0, a=None) -> MapSpec:
    """x -> a + r^2 (x-a)/|x-a|^2 with weight (r/|x-a|)^(2(m-2))."""
    coords = ("x", "y", "z") if m == 3 else tuple(f"x{i + 1}" for i in range(m))
    a = [0.0] * m if a is None else list(a)
    shifted = [as_expr(c) - a[i] if a[i] else as_expr(c) for i, c in enumerate(coords)]
    dist2 = None
    for s in shifted:
        dist2 = s ** 2 if dist2 is None else dist2 + s ** 2
    r2 = as_expr(r * r)
    comps = [(r2 / dist2) * s + a[i] if a[i] else (r2 / dist2) * s for i, s in enumerate(shifted)]
    weight = (as_expr(r) / dist2 ** 0.5) ** as_expr(2 * (m - 2))
    # sampled shell 0.5 <= |x - a| <= 3
    domain = parse("min(d2 - 0.25, 9 - d2)")
    domain = substitute(domain, {"d2": dist2})
    box = tuple((a[i] - 3.0, a[i] + 3.0) for i in range(m))
    src = euclidean(coords, name=f"R{m}-shell", domain=domain, sample_box=box)
    tgt = euclidean(tuple(c.upper() for c in coords), name=f"R{m}")
    return MapSpec(src, tgt, comps, weight, "mobius_inversion")


def euclid_to_hyperbolic() -> MapSpec:
    src = euclidean("xyz", name="R2xR+", domain="z", sample_box=((-2, 2), (-2, 2), (0.1, 3)))
    tgt = half_space(("X", "Z"), name="H2")
    return MapSpec(src, tgt, ("x", "sqrt(y^2+z^2)"), "1/z", "euclid_to_hyperbolic")


def hopf_map(round_source: bool = False) -> MapSpec:
    """Hopf fibration S^3 -> S^2 written in the stereographic chart of S^3.

    The point of R^3 goes to S^3 by inverse stereographic projection, then
    (z, w) -> (|z|^2 - |w|^2, 2zw), then to the plane by projecting from
    (1, 0, 0) on S^2. With ``round_source`` the source carries the round
    metric, otherwise the flat one (where the map is f-harmonic for
    f = 2/(1+|x|^2)).
    """
    coords = ("x1", "x2", "x3")
    rr = _r2(coords)
    d = 1 + rr
    zr, zi = 2 * as_expr("x1") / d, 2 * as_expr("x2") / d
    wr, wi = 2 * as_expr("x3") / d, (rr - 1) / d
    a = zr ** 2 + zi ** 2 - wr ** 2 - wi ** 2
    b = 2 * (zr * wr - zi * wi)
    c = 2 * (zr * wi + zi * wr)
    # stereographic projection of (a, b, c) from (1, 0, 0)
    comps = (b / (1 - a), c / (1 - a))
    if round_source:
        src = stereo_sphere(coords, name="S3")
        weight = None
    else:
        src = euclidean(coords, name="R3-hopf")
        weight = 2 / d
    return MapSpec(src, s2_chart(), comps, weight, "hopf_r3" if not round_source else "hopf_s3")


def radial_projection(alpha: str = "t^2+1") -> MapSpec:
    """x -> x/|x| from R^3 minus the origin to S^2, weight alpha(|x|)."""
    src = euclidean("xyz", name="R3-punctured", domain="x^2+y^2+z^2 - 0.01")
    r = _r2("xyz") ** 0.5
    u = [as_expr(c) / r for c in "xyz"]
    weight = substitute(parse(alpha), {"t": r})
    return MapSpec(src, s2_chart(), sphere_to_stereo(*u), weight, "radial_projection")


def poly_cyl(poly: str = "z^2", alpha: str = "exp(t)") -> MapSpec:
    """(t, x, y) -> p(x + iy), weight alpha(t). ``poly`` is z^k for an integer k >= 1."""
    k = int(poly.split("^")[1]) if "^" in poly else 1
    x, y = as_expr("x"), as_expr("y")
    re, im = x, y
    for _ in range(k - 1):
        re, im = re * x - im * y, re * y + im * x
    src = euclidean(("t", "x", "y"), name="RxC")
    return MapSpec(src, euclidean(("X", "Y"), name="C"), (re, im), parse(alpha), "poly_cyl")


def rotation_of_s2(angle: float = 0.7) -> MapSpec:
    """Rotation of S^2 about the first axis, in the stereographic chart."""
    import math
    u1, u2, u3 = stereo_to_sphere("s1", "s2")
    c, s = math.cos(angle), math.sin(angle)
    v2 = c * u2 - s * u3
    v3 = s * u2 + c * u3
    return MapSpec(s2_chart(), s2_chart(), sphere_to_stereo(u1, v2, v3), None, "rotation_s2")


def catalog() -> list:
    return [
        CatalogEntry("ex1_projection", projection_map(), dict(MORPHISM),
                     "orthogonal projection R^3 -> R^2 with weight e^z; horizontally conformal submersion"),
        CatalogEntry("ex1_psi", psi_map(), dict(NOT_HWC),
                     "(3x, xy) with weight e^z; f-harmonic but not horizontally weakly conformal"),
        CatalogEntry("ex1_phi", phi_map(), dict(NOT_HWC),
                     "(x, y+z) with weight e^(y-z); submersion, not horizontally weakly conformal"),
        CatalogEntry("mobius_inversion", mobius_inversion(), dict(MORPHISM),
                     "inversion in the unit sphere, dilation r^2/|x-a|^2, weight C (r/|x-a|)^(2(m-2))",
                     {"m": 3, "r": 1.0, "a": [0.0, 0.0, 0.0]}),
        CatalogEntry("euclid_to_hyperbolic", euclid_to_hyperbolic(), dict(MORPHISM),
                     "(x, 0, sqrt(y^2+z^2)) into the hyperbolic plane with weight 1/z"),
        CatalogEntry("hopf_r3", hopf_map(), dict(MORPHISM),
                     "Hopf fibration in the flat chart of S^3, weight 2/(1+|x|^2)"),
        CatalogEntry("radial_projection", radial_projection(), dict(MORPHISM),
                     "x/|x| onto S^2 with radial weight alpha(|x|), alpha(t) = t^2 + 1", {"alpha": "t^2+1"}),
        CatalogEntry("poly_cyl", poly_cyl(), dict(MORPHISM),
                     "(t, z) -> p(z) with p(z) = z^2, weight alpha(t) = e^t", {"p": "z^2", "alpha": "exp(t)"}),
    ]


def catalog_entry(key: str) -> CatalogEntry:
    for e in catalog():
        if e.key == key:
            return e
    raise KeyError(key)
