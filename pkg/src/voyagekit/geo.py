"""Geographic primitives, voyage segmentation, and route-segment assignment.

All coordinates are WGS84 latitude/longitude in decimal degrees. Distances
come in two flavors: great-circle meters for metric-correct work and plain
degree-space Euclidean for path-similarity math, where the raw coordinate
differences are the quantity of interest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError

EARTH_RADIUS_M = 6_371_000.0

#: Default port-dwell split rule: a stop of at least this many seconds ...
PORT_DWELL_S = 120.0
#: ... below this speed over ground (m/s), inside a port region, ends a voyage.
PORT_DWELL_MAX_SOG = 0.5


@dataclass(frozen=True)
class GeoPoint:
    """A position in decimal degrees, validated on construction."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidInputError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidInputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidInputError(f"longitude {self.lon} outside [-180, 180]")


@dataclass
class SamplePoint:
    """One timestamped onboard record with attached weather channels.

    ``weather`` maps channel names (e.g. ``WindSpeed_onb``, ``WaveHeight``)
    to values in the units the channel was recorded in.
    """

    timestamp: float
    position: GeoPoint
    sog: float
    heading: float
    fuel_rate: float
    weather: dict[str, float] = field(default_factory=dict)


@dataclass
class Voyage:
    """An ordered port-to-port sequence of samples (n >= 2)."""

    voyage_id: str
    samples: list[SamplePoint]
    origin: str = ""
    destination: str = ""

    def __post_init__(self):
        if len(self.samples) < 2:
            raise InvalidInputError(
                f"voyage {self.voyage_id!r} has {len(self.samples)} samples, need >= 2"
            )
        ts = [s.timestamp for s in self.samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidInputError(f"voyage {self.voyage_id!r} samples not time-ordered")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return self.samples[-1].timestamp - self.samples[0].timestamp


class RouteSegmentSpec:
    """Named, ordered list of bounding polygons partitioning a route.

    Overlaps are resolved by list order: the first polygon containing a
    point wins. Polygons are (k, 2) arrays of [lat, lon] vertices.
    """

    def __init__(self, segments: Sequence[tuple[str, Sequence[Sequence[float]]]]):
        if not segments:
            raise ConfigurationError("segment spec is empty")
        names = [name for name, _ in segments]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate segment names in {names}")
        self.segments: list[tuple[str, np.ndarray]] = []
        for name, poly in segments:
            arr = np.asarray(poly, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
                raise ConfigurationError(
                    f"segment {name!r}: polygon needs >= 3 [lat, lon] vertices"
                )
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"segment {name!r}: non-finite vertex")
            self.segments.append((name, arr))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.segments]

    @classmethod
    def from_json(cls, path: str | Path) -> "RouteSegmentSpec":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"segment spec file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise ConfigurationError(f"{path}: expected a JSON array of segments")
        try:
            return cls([(entry["name"], entry["polygon"]) for entry in raw])
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"{path}: malformed segment entry ({exc})") from exc

    def to_json(self, path: str | Path) -> None:
        payload = [
            {"name": name, "polygon": poly.tolist()} for name, poly in self.segments
        ]
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters (Earth radius 6,371,000 m)."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def euclidean_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Plain degree-space distance sqrt(dlat^2 + dlon^2), no latitude scaling."""
    return math.hypot(a.lat - b.lat, a.lon - b.lon)


def point_in_polygon(lat: float, lon: float, polygon: np.ndarray) -> bool:
    """Even-odd ray-casting containment test on [lat, lon] vertices."""
    inside = False
    n = len(polygon)
    for i in range(n):
        la1, lo1 = polygon[i]
        la2, lo2 = polygon[(i + 1) % n]
        if (lo1 > lon) != (lo2 > lon):
            x = la1 + (lon - lo1) * (la2 - la1) / (lo2 - lo1)
            if lat < x:
                inside = not inside
    return inside


def assign_segment(p: GeoPoint, spec: RouteSegmentSpec) -> str:
    """Name of the first segment polygon containing ``p``, else "unassigned"."""
    for name, poly in spec.segments:
        if point_in_polygon(p.lat, p.lon, poly):
            return name
    return "unassigned"


@dataclass
class SplitResult:
    voyages: list[Voyage]
    dropped_samples: list[SamplePoint]

    @property
    def dropped_count(self) -> int:
        return len(self.dropped_samples)


def split_into_voyages(
    samples: Sequence[SamplePoint],
    gap_threshold: float,
    port_regions: RouteSegmentSpec | None = None,
    *,
    dwell_threshold: float = PORT_DWELL_S,
    dwell_max_sog: float = PORT_DWELL_MAX_SOG,
    id_prefix: str = "V",
) -> SplitResult:
    """Cut a time-ordered sample stream into voyages.

    A new voyage starts after a timestamp gap larger than ``gap_threshold``,
    or after the vessel has dwelt for at least ``dwell_threshold`` seconds
    inside any port region with sog below ``dwell_max_sog``. Dwell samples
    stay with the voyage they end. Segments shorter than two samples are
    dropped and reported in the result.

    Voyage ids are ``{prefix}0001``, ``{prefix}0002``, ... in time order.
    """
    if gap_threshold <= 0:
        raise ConfigurationError(f"gap_threshold must be > 0, got {gap_threshold}")
    ts = [s.timestamp for s in samples]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise InvalidInputError("samples are not time-ordered")

    def in_port_dwell(s: SamplePoint) -> bool:
        if port_regions is None or s.sog >= dwell_max_sog:
            return False
        return assign_segment(s.position, port_regions) != "unassigned"

    segments: list[list[SamplePoint]] = []
    current: list[SamplePoint] = []
    dwell_start: float | None = None
    prev: SamplePoint | None = None
    for s in samples:
        split_here = False
        if prev is not None and s.timestamp - prev.timestamp > gap_threshold:
            split_here = True
        if prev is not None and not split_here and dwell_start is not None:
            # The dwell ends at this sample; split if it lasted long enough.
            if not in_port_dwell(s) and prev.timestamp - dwell_start >= dwell_threshold:
                split_here = True
        if split_here and current:
            segments.append(current)
            current = []
            dwell_start = None
        if in_port_dwell(s):
            if dwell_start is None:
                dwell_start = s.timestamp
        else:
            dwell_start = None
        current.append(s)
        prev = s
    if current:
        segments.append(current)

    voyages: list[Voyage] = []
    dropped: list[SamplePoint] = []
    counter = 0
    for seg in segments:
        if len(seg) < 2:
            dropped.extend(seg)
            continue
        counter += 1
        voyages.append(Voyage(voyage_id=f"{id_prefix}{counter:04d}", samples=seg))
    return SplitResult(voyages=voyages, dropped_samples=dropped)


def polyline_length_deg(points: Iterable[tuple[float, float]]) -> float:
    """Total degree-space length of a [lat, lon] polyline."""
    pts = list(points)
    return sum(
        math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])
    )
