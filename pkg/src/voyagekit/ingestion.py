"""Onboard CSV parsing, weather-grid ingestion, resampling, and alignment.

Weather hindcasts arrive as long-format CSV (one file per variable, columns
time/lat/lon/value) and are assembled into dense 3-D grids. Each voyage
sample gets every grid variable attached by trilinear interpolation over the
enclosing (time, lat, lon) cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
    OutOfDomainError,
    SchemaError,
)
from .geo import GeoPoint, SamplePoint, Voyage

#: Onboard columns that must parse for a row to be kept.
REQUIRED_COLUMNS = (
    "Timestamp",
    "Latitude",
    "Longitude",
    "SpeedOverGround",
    "HeadingMagnetic",
    "EngineFuelRate",
)

#: Optional onboard weather channels, kept under their column names.
ONBOARD_CHANNELS = ("WindSpeed_onb", "WindDirection_onb")

# Interpolation status codes used by WeatherGrid.interpolate_many.
_OK = 0
_OUT_OF_DOMAIN = 1
_MISSING_CORNER = 2


def _parse_timestamp(raw: str) -> float:
    """Epoch seconds from an integer/float string or ISO-8601 text (UTC)."""
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    text = raw.replace("Z", "+00:00")
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_onboard_csv(path: str | Path) -> tuple[list[SamplePoint], int]:
    """Read one onboard CSV into SamplePoints sorted by timestamp.

    Column names are matched case-insensitively. Rows whose required
    fields do not parse (or violate their domain, e.g. negative speed)
    are skipped; the skip count is returned alongside the samples.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"onboard file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        lower_to_index = {name.strip().lower(): i for i, name in enumerate(header)}
        col_index: dict[str, int] = {}
        for name in REQUIRED_COLUMNS:
            idx = lower_to_index.get(name.lower())
            if idx is None:
                raise SchemaError(f"{path}: missing required column {name!r}")
            col_index[name] = idx
        channel_index = {
            name: lower_to_index[name.lower()]
            for name in ONBOARD_CHANNELS
            if name.lower() in lower_to_index
        }

        samples: list[SamplePoint] = []
        skipped = 0
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                ts = _parse_timestamp(row[col_index["Timestamp"]])
                lat = float(row[col_index["Latitude"]])
                lon = float(row[col_index["Longitude"]])
                sog = float(row[col_index["SpeedOverGround"]])
                heading = float(row[col_index["HeadingMagnetic"]])
                fuel = float(row[col_index["EngineFuelRate"]])
                if not all(map(math.isfinite, (ts, lat, lon, sog, heading, fuel))):
                    raise ValueError("non-finite required field")
                if sog < 0 or fuel < 0:
                    raise ValueError("negative speed or fuel rate")
                position = GeoPoint(lat, lon)
            except (ValueError, IndexError, InvalidInputError):
                skipped += 1
                continue
            weather: dict[str, float] = {}
            for name, idx in channel_index.items():
                try:
                    value = float(row[idx])
                except (ValueError, IndexError):
                    continue
                if not math.isfinite(value):
                    continue
                if "direction" in name.lower():
                    value = value % 360.0
                weather[name] = value
            samples.append(
                SamplePoint(
                    timestamp=ts,
                    position=position,
                    sog=sog,
                    heading=heading % 360.0,
                    fuel_rate=fuel,
                    weather=weather,
                )
            )
    if not samples and skipped == 0:
        raise SchemaError(f"{path}: no data rows")
    samples.sort(key=lambda s: s.timestamp)
    return samples, skipped


@dataclass
class WeatherGrid:
    """Dense (time, lat, lon) field for one variable; NaN marks missing cells."""

    variable: str
    times: np.ndarray
    lats: np.ndarray
    lons: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name, axis in (("time", self.times), ("lat", self.lats), ("lon", self.lons)):
            if len(axis) < 2 or np.any(np.diff(axis) <= 0):
                raise InvalidInputError(
                    f"grid {self.variable!r}: {name} axis must be strictly increasing with >= 2 entries"
                )
        expected = (len(self.times), len(self.lats), len(self.lons))
        if self.values.shape != expected:
            raise InvalidInputError(
                f"grid {self.variable!r}: values shape {self.values.shape} != {expected}"
            )

    def interpolate_many(
        self, times: np.ndarray, lats: np.ndarray, lons: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized trilinear interpolation.

        Returns (values, status) where status is 0 for ok, 1 for
        out-of-domain queries, and 2 for queries with a missing corner.
        Failed queries get NaN values.
        """
        t = np.asarray(times, dtype=float)
        la = np.asarray(lats, dtype=float)
        lo = np.asarray(lons, dtype=float)
        status = np.zeros(t.shape, dtype=np.int8)
        out = (
            (t < self.times[0]) | (t > self.times[-1])
            | (la < self.lats[0]) | (la > self.lats[-1])
            | (lo < self.lons[0]) | (lo > self.lons[-1])
            | ~np.isfinite(t) | ~np.isfinite(la) | ~np.isfinite(lo)
        )
        status[out] = _OUT_OF_DOMAIN

        def cell_index(axis: np.ndarray, q: np.ndarray) -> np.ndarray:
            idx = np.searchsorted(axis, q, side="right") - 1
            return np.clip(idx, 0, len(axis) - 2)

        it = cell_index(self.times, t)
        ila = cell_index(self.lats, la)
        ilo = cell_index(self.lons, lo)

        def frac(axis: np.ndarray, idx: np.ndarray, q: np.ndarray) -> np.ndarray:
            lo_edge = axis[idx]
            hi_edge = axis[idx + 1]
            return (q - lo_edge) / (hi_edge - lo_edge)

        ft = frac(self.times, it, t)
        fla = frac(self.lats, ila, la)
        flo = frac(self.lons, ilo, lo)

        result = np.zeros(t.shape, dtype=float)
        corner_missing = np.zeros(t.shape, dtype=bool)
        for dt in (0, 1):
            for dla in (0, 1):
                for dlo in (0, 1):
                    corner = self.values[it + dt, ila + dla, ilo + dlo]
                    corner_missing |= ~np.isfinite(corner)
                    w = (
                        (ft if dt else 1.0 - ft)
                        * (fla if dla else 1.0 - fla)
                        * (flo if dlo else 1.0 - flo)
                    )
                    result = result + w * np.where(np.isfinite(corner), corner, 0.0)
        status[(status == _OK) & corner_missing] = _MISSING_CORNER
        result[status != _OK] = np.nan
        return result, status


def parse_weather_grid(path: str | Path, variable: str | None = None) -> WeatherGrid:
    """Assemble a dense WeatherGrid from a long-format time/lat/lon/value CSV.

    The variable name defaults to the file name stem. Lattice cells absent
    from the file are marked missing; duplicate keys with conflicting values
    are an error.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"weather file not found: {path}")
    variable = variable or path.stem
    rows: dict[tuple[float, float, float], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        try:
            idx = {name: header.index(name) for name in ("time", "lat", "lon", "value")}
        except ValueError as exc:
            raise SchemaError(f"{path}: expected columns time, lat, lon, value") from exc
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                key = (
                    float(row[idx["time"]]),
                    float(row[idx["lat"]]),
                    float(row[idx["lon"]]),
                )
                value = float(row[idx["value"]])
            except (ValueError, IndexError) as exc:
                raise InvalidInputError(f"{path}: unparseable row {row!r}") from exc
            if key in rows and not (
                rows[key] == value or (math.isnan(rows[key]) and math.isnan(value))
            ):
                raise InvalidInputError(
                    f"{path}: conflicting values at (time, lat, lon)={key}: "
                    f"{rows[key]} vs {value}"
                )
            rows[key] = value
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    times = np.array(sorted({k[0] for k in rows}))
    lats = np.array(sorted({k[1] for k in rows}))
    lons = np.array(sorted({k[2] for k in rows}))
    values = np.full((len(times), len(lats), len(lons)), np.nan)
    t_pos = {v: i for i, v in enumerate(times)}
    la_pos = {v: i for i, v in enumerate(lats)}
    lo_pos = {v: i for i, v in enumerate(lons)}
    for (t, la, lo), value in rows.items():
        values[t_pos[t], la_pos[la], lo_pos[lo]] = value
    return WeatherGrid(variable=variable, times=times, lats=lats, lons=lons, values=values)


def trilinear_interpolate(grid: WeatherGrid, t: float, p: GeoPoint) -> float:
    """Trilinear blend of the 8 cells enclosing (t, p); exact at grid nodes."""
    values, status = grid.interpolate_many(
        np.array([t]), np.array([p.lat]), np.array([p.lon])
    )
    if status[0] == _OUT_OF_DOMAIN:
        raise OutOfDomainError(
            f"query (t={t}, lat={p.lat}, lon={p.lon}) outside grid {grid.variable!r}"
        )
    if status[0] == _MISSING_CORNER:
        raise MissingDataError(
            f"grid {grid.variable!r} has a missing corner around "
            f"(t={t}, lat={p.lat}, lon={p.lon})"
        )
    return float(values[0])


def _circular_mean_deg(values: np.ndarray) -> float:
    rad = np.radians(values)
    angle = math.atan2(float(np.mean(np.sin(rad))), float(np.mean(np.cos(rad))))
    deg = math.degrees(angle) % 360.0
    return 0.0 if deg >= 360.0 else deg


def resample_voyage(v: Voyage, period: float = 60.0) -> Voyage:
    """Bin-average a voyage onto consecutive windows anchored at its start.

    Numeric channels take the arithmetic mean per bin; headings and any
    *Direction* channel take the circular (vector) mean. Empty bins are
    omitted and output timestamps are bin starts.
    """
    if period <= 0:
        raise ConfigurationError(f"resample period must be > 0, got {period}")
    t0 = v.samples[0].timestamp
    bins: dict[int, list[SamplePoint]] = {}
    for s in v.samples:
        bins.setdefault(int((s.timestamp - t0) // period), []).append(s)

    out: list[SamplePoint] = []
    for k in sorted(bins):
        group = bins[k]
        lat = float(np.mean([s.position.lat for s in group]))
        lon = float(np.mean([s.position.lon for s in group]))
        sog = float(np.mean([s.sog for s in group]))
        fuel = float(np.mean([s.fuel_rate for s in group]))
        heading = _circular_mean_deg(np.array([s.heading for s in group]))
        weather: dict[str, float] = {}
        shared = set(group[0].weather)
        for s in group[1:]:
            shared &= set(s.weather)
        for name in sorted(shared):
            channel = np.array([s.weather[name] for s in group])
            if "direction" in name.lower():
                weather[name] = _circular_mean_deg(channel)
            else:
                weather[name] = float(np.mean(channel))
        out.append(
            SamplePoint(
                timestamp=t0 + k * period,
                position=GeoPoint(lat, lon),
                sog=sog,
                heading=heading,
                fuel_rate=fuel,
                weather=weather,
            )
        )
    if len(out) < 2:
        raise InsufficientDataError(
            f"voyage {v.voyage_id!r}: resampling at {period}s leaves {len(out)} sample(s)"
        )
    return Voyage(
        voyage_id=v.voyage_id, samples=out, origin=v.origin, destination=v.destination
    )


def attach_weather(v: Voyage, grids: list[WeatherGrid]) -> tuple[Voyage, int]:
    """Attach every grid variable to every sample by trilinear interpolation.

    Samples for which any grid fails (out of domain or missing corner) are
    dropped; the drop count is returned. Raises InsufficientDataError when
    fewer than two samples survive.
    """
    times = np.array([s.timestamp for s in v.samples])
    lats = np.array([s.position.lat for s in v.samples])
    lons = np.array([s.position.lon for s in v.samples])
    keep = np.ones(len(v.samples), dtype=bool)
    per_grid: dict[str, np.ndarray] = {}
    for grid in grids:
        values, status = grid.interpolate_many(times, lats, lons)
        keep &= status == _OK
        per_grid[grid.variable] = values
    kept: list[SamplePoint] = []
    for i, s in enumerate(v.samples):
        if not keep[i]:
            continue
        weather = dict(s.weather)
        for name, values in per_grid.items():
            value = float(values[i])
            if "direction" in name.lower():
                value = value % 360.0
            weather[name] = value
        kept.append(
            SamplePoint(
                timestamp=s.timestamp,
                position=s.position,
                sog=s.sog,
                heading=s.heading,
                fuel_rate=s.fuel_rate,
                weather=weather,
            )
        )
    dropped = len(v.samples) - len(kept)
    if len(kept) < 2:
        raise InsufficientDataError(
            f"voyage {v.voyage_id!r}: only {len(kept)} samples remain after weather alignment"
        )
    return (
        Voyage(voyage_id=v.voyage_id, samples=kept, origin=v.origin, destination=v.destination),
        dropped,
    )
