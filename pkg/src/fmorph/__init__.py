"""f-harmonic map calculus engine.

Charts and maps are given by expressions; tension fields, f-tension,
Laplacians and conformality data are evaluated exactly (up to roundoff)
with second-order jets. See ``fmorph.verifier`` for classification and
``fmorph.spin`` for the discrete spin system.
"""
from .errors import FmorphError
from .exprlang import parse, to_source
from .geometry import RiemannianChart, euclidean, half_space, metric_at, stereo_sphere
from .mapcalc import MapSpec, f_tension, tension
from .verifier import SamplerConfig, Verdict, classify

__all__ = [
    "FmorphError", "parse", "to_source", "RiemannianChart", "euclidean", "half_space",
    "metric_at", "stereo_sphere", "MapSpec", "f_tension", "tension", "SamplerConfig",
    "Verdict", "classify",
]

__version__ = "0.1.0"
