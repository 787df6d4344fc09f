"""File-based voyage store: one CSV per voyage plus a JSON manifest.

Commands hand data to each other through this store, so every value is
written with full float precision (repr round-trips exactly).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .errors import InvalidInputError
from .geo import GeoPoint, SamplePoint, Voyage

CORE_COLUMNS = (
    "Timestamp",
    "Latitude",
    "Longitude",
    "SpeedOverGround",
    "HeadingMagnetic",
    "EngineFuelRate",
)


def write_store(voyages: Sequence[Voyage], store_dir: str | Path, extra_meta: dict | None = None) -> None:
    store = Path(store_dir)
    (store / "voyages").mkdir(parents=True, exist_ok=True)
    entries = []
    for v in voyages:
        channels = sorted(set.intersection(*[set(s.weather) for s in v.samples]))
        with open(store / "voyages" / f"{v.voyage_id}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([*CORE_COLUMNS, *channels])
            for s in v.samples:
                writer.writerow(
                    [
                        repr(float(s.timestamp)),
                        repr(float(s.position.lat)),
                        repr(float(s.position.lon)),
                        repr(float(s.sog)),
                        repr(float(s.heading)),
                        repr(float(s.fuel_rate)),
                        *[repr(float(s.weather[c])) for c in channels],
                    ]
                )
        entries.append(
            {
                "voyage_id": v.voyage_id,
                "n_samples": len(v.samples),
                "origin": v.origin,
                "destination": v.destination,
            }
        )
    manifest = {"voyages": entries}
    if extra_meta:
        manifest.update(extra_meta)
    with open(store / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_store(store_dir: str | Path) -> list[Voyage]:
    store = Path(store_dir)
    manifest_path = store / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInputError(f"voyage store not found: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    voyages = []
    for entry in manifest["voyages"]:
        vid = entry["voyage_id"]
        path = store / "voyages" / f"{vid}.csv"
        if not path.exists():
            raise InvalidInputError(f"store manifest lists {vid} but {path} is missing")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            channels = header[len(CORE_COLUMNS):]
            samples = []
            for row in reader:
                values = [float(x) for x in row]
                samples.append(
                    SamplePoint(
                        timestamp=values[0],
                        position=GeoPoint(values[1], values[2]),
                        sog=values[3],
                        heading=values[4],
                        fuel_rate=values[5],
                        weather=dict(zip(channels, values[len(CORE_COLUMNS):])),
                    )
                )
        voyages.append(
            Voyage(
                voyage_id=vid,
                samples=samples,
                origin=entry.get("origin", ""),
                destination=entry.get("destination", ""),
            )
        )
    return voyages
