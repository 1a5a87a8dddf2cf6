"""Feature schemas: named context dimensions and their binarized layout.

A schema declares the ordered context dimensions of a dataset. Nominal
dimensions expand to one binarized column per category; numeric dimensions
occupy a single column scaled to [0, 1] with declared bounds. The total
column count is the schema width, and every context vector produced under
the schema has exactly that width.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError

NOMINAL = "nominal"
NUMERIC = "numeric"


@dataclass(frozen=True)
class Dimension:
    """One context dimension: nominal with categories, or bounded numeric."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    bounds: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in (NOMINAL, NUMERIC):
            raise SchemaError(f"dimension {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NOMINAL:
            if not self.categories:
                raise SchemaError(f"nominal dimension {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"dimension {self.name!r} has duplicate categories")
        else:
            lo, hi = self.bounds
            if not lo < hi:
                raise SchemaError(f"numeric dimension {self.name!r}: bounds {self.bounds} are not increasing")

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind == NOMINAL else 1


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered dimensions plus the derived binarized-column layout."""

    dimensions: tuple[Dimension, ...]
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise SchemaError("dimension names must be unique")
        offsets, pos = [], 0
        for d in self.dimensions:
            offsets.append(pos)
            pos += d.width
        object.__setattr__(self, "_offsets", tuple(offsets))

    @property
    def width(self) -> int:
        return sum(d.width for d in self.dimensions)

    @property
    def dimension_names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    def dimension(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise SchemaError(f"no dimension named {name!r}")

    def column_span(self, name: str) -> tuple[int, int]:
        """Half-open column range [start, stop) of a dimension in the binarized layout."""
        for d, off in zip(self.dimensions, self._offsets):
            if d.name == name:
                return off, off + d.width
        raise SchemaError(f"no dimension named {name!r}")

    def column_names(self) -> list[str]:
        """One label per binarized column, e.g. ``daytype=weekend`` or ``light``."""
        out = []
        for d in self.dimensions:
            if d.kind == NOMINAL:
                out.extend(f"{d.name}={c}" for c in d.categories)
            else:
                out.append(d.name)
        return out

    def to_dict(self) -> dict:
        dims = []
        for d in self.dimensions:
            entry: dict = {"name": d.name, "kind": d.kind}
            if d.kind == NOMINAL:
                entry["categories"] = list(d.categories)
            else:
                entry["min"], entry["max"] = d.bounds
            dims.append(entry)
        return {"dimensions": dims}

    def hash(self) -> str:
        """Stable digest of the schema layout, recorded in trained-model headers."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def schema_from_dict(data: dict) -> FeatureSchema:
    dims = []
    for entry in data.get("dimensions", []):
        kind = entry.get("kind", NOMINAL)
        if kind == NOMINAL:
            dims.append(Dimension(entry["name"], NOMINAL, tuple(entry["categories"])))
        else:
            dims.append(
                Dimension(
                    entry["name"],
                    NUMERIC,
                    bounds=(float(entry.get("min", 0.0)), float(entry.get("max", 1.0))),
                )
            )
    if not dims:
        raise SchemaError("schema declares no dimensions")
    return FeatureSchema(tuple(dims))


def load_schema(path: str | Path) -> tuple[FeatureSchema, tuple[float, float]]:
    """Read a schema file; returns the schema and the dataset rating scale."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    scale = data.get("rating_scale", [1.0, 5.0])
    if len(scale) != 2 or not float(scale[0]) < float(scale[1]):
        raise SchemaError(f"invalid rating_scale {scale}")
    return schema_from_dict(data), (float(scale[0]), float(scale[1]))


def save_schema(path: str | Path, schema: FeatureSchema, rating_scale: tuple[float, float]) -> None:
    data = schema.to_dict()
    data["rating_scale"] = [rating_scale[0], rating_scale[1]]
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- built-in schemas ------------------------------------------------------
#
# Stand-ins for the two benchmark feature spaces: a mobile-sensing style
# schema binarizing to 268 columns over 15 dimensions, and a review-site
# style schema binarizing to 9 columns over 5 dimensions. The original raw
# data is not redistributable, so these fix only the declared layout.


def _cars_style() -> FeatureSchema:
    nominal = [
        ("location_cluster", 80),
        ("app_traffic", 40),
        ("microphone_level", 40),
        ("weather", 30),
        ("activity", 25),
        ("cell_state", 20),
        ("time_of_day", 12),
        ("ringer_mode", 10),
        ("day_type", 5),
    ]
    dims = [Dimension(name, NOMINAL, tuple(f"c{i}" for i in range(n))) for name, n in nominal]
    for sensor in ("light", "battery", "gravity", "accel_x", "accel_y", "accel_z"):
        dims.append(Dimension(sensor, NUMERIC))
    return FeatureSchema(tuple(dims))


def _yelp_style() -> FeatureSchema:
    dims = (
        Dimension("season_half", NOMINAL, ("h1", "h2")),
        Dimension("day_type", NOMINAL, ("weekday", "weekend")),
        Dimension("holiday", NOMINAL, ("yes", "no")),
        Dimension("city_tier", NOMINAL, ("a", "b")),
        Dimension("checkin_hour", NUMERIC, bounds=(0.0, 24.0)),
    )
    return FeatureSchema(dims)


def _small_style() -> FeatureSchema:
    dims = (
        Dimension("time_of_day", NOMINAL, ("morning", "afternoon", "evening")),
        Dimension("weather", NOMINAL, ("sunny", "cloudy", "rain", "snow")),
        Dimension("day_type", NOMINAL, ("weekday", "weekend")),
        Dimension("light", NUMERIC),
        Dimension("battery", NUMERIC),
        Dimension("noise", NUMERIC),
    )
    return FeatureSchema(dims)


_BUILTINS = {
    "cars": (_cars_style, (1.0, 5.0)),
    "yelp": (_yelp_style, (1.0, 5.0)),
    "small": (_small_style, (1.0, 5.0)),
}


def builtin_schema(name: str) -> tuple[FeatureSchema, tuple[float, float]]:
    """Look up a named built-in schema; returns (schema, rating_scale)."""
    key = name.removeprefix("builtin:")
    if key not in _BUILTINS:
        raise SchemaError(f"unknown builtin schema {name!r} (have: {sorted(_BUILTINS)})")
    factory, scale = _BUILTINS[key]
    return factory(), scale
