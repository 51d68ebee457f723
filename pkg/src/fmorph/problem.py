"""Problem documents: JSON files bundling charts, maps and expected verdicts.

Layout (schema "fmorph/1")::

    {
      "schema": "fmorph/1",
      "charts": [{"name", "coords", "metric", "domain"?, "sample_box"?}, ...],
      "maps": [{"name", "source", "target", "components", "weight"?, "expected"?}, ...],
      "defaults": {"tol_resid", "tol_hwc", "samples", "seed"}
    }

``catalog://KEY`` stands for the document of a built-in catalog entry.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import catalog_entry
from .errors import ExprSyntaxError, FmorphError, SchemaError
from .geometry import RiemannianChart
from .mapcalc import MapSpec

SCHEMA = "fmorph/1"
CATALOG_SCHEME = "catalog://"
DEFAULTS = {"tol_resid": 1e-8, "tol_hwc": 1e-8, "samples": 200, "seed": 0}
EXPECTED_KEYS = {"is_f_harmonic", "is_hwc", "is_f_harmonic_morphism", "is_horizontally_homothetic",
                 "fibers_minimal", "degenerate"}


@dataclass
class ProblemDoc:
    charts: dict
    maps: list
    expected: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=lambda: dict(DEFAULTS))

    def get_map(self, name: str = None) -> MapSpec:
        if name is None:
            return self.maps[0]
        for mp in self.maps:
            if mp.name == name:
                return mp
        raise SchemaError(f"no map named {name!r}; available: {[m.name for m in self.maps]}")

    def to_dict(self) -> dict:
        maps = []
        for mp in self.maps:
            d = mp.to_dict()
            if mp.name in self.expected:
                d["expected"] = dict(self.expected[mp.name])
            maps.append(d)
        return {"schema": SCHEMA, "charts": [c.to_dict() for c in self.charts.values()],
                "maps": maps, "defaults": dict(self.defaults)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def loads(text: str) -> ProblemDoc:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON at offset {exc.pos} (line {exc.lineno}, "
                          f"column {exc.colno}): {exc.msg}") from None
    return from_dict(raw)


def from_dict(raw) -> ProblemDoc:
    if not isinstance(raw, dict):
        raise SchemaError("problem document must be a JSON object")
    if raw.get("schema") != SCHEMA:
        raise SchemaError(f"expected schema {SCHEMA!r}, got {raw.get('schema')!r}")
    try:
        charts = {}
        for block in raw.get("charts", []):
            ch = RiemannianChart.from_dict(block)
            if ch.name in charts:
                raise SchemaError(f"duplicate chart name {ch.name!r}")
            charts[ch.name] = ch
        maps, expected = [], {}
        for block in raw.get("maps", []):
            for key in ("source", "target", "components"):
                if key not in block:
                    raise SchemaError(f"map block missing field {key!r}")
            for side in ("source", "target"):
                if block[side] not in charts:
                    raise SchemaError(f"map {block.get('name')!r} refers to unknown chart {block[side]!r}")
            mp = MapSpec(charts[block["source"]], charts[block["target"]], tuple(block["components"]),
                         block.get("weight"), block.get("name", f"map{len(maps)}"))
            maps.append(mp)
            if "expected" in block:
                exp = block["expected"]
                bad = set(exp) - EXPECTED_KEYS
                if bad:
                    raise SchemaError(f"unknown expected keys {sorted(bad)}")
                expected[mp.name] = dict(exp)
    except ExprSyntaxError as exc:
        raise SchemaError(f"expression error: {exc}") from None
    if not maps:
        raise SchemaError("problem document has no maps")
    defaults = dict(DEFAULTS)
    defaults.update(raw.get("defaults", {}))
    return ProblemDoc(charts, maps, expected, defaults)


def load(ref: str) -> ProblemDoc:
    """Load a file path or a ``catalog://KEY`` reference."""
    if ref.startswith(CATALOG_SCHEME):
        key = ref[len(CATALOG_SCHEME):]
        try:
            entry = catalog_entry(key)
        except KeyError:
            raise SchemaError(f"unknown catalog key {key!r}") from None
        return from_dict(entry.to_dict())
    try:
        text = Path(ref).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {ref}: {exc.strerror}") from None
    return loads(text)
