"""Voyage efficiency scoring, percentile clustering, and fuel/time estimation.

The efficiency score of a voyage is one minus the harmonic mean of its
max-normalized total fuel and total time: higher is better, the fleet's
worst voyage (both maxima) scores 0, and a hypothetical zero-fuel zero-time
voyage scores 1. Percentile clusters are nested sets of the top-P% voyages
by that score.

The fuel-rate estimator used to compare measured against suggested speed
profiles is a distance-weighted nearest-neighbor regressor behind a small
interface, so an alternative (e.g. a trained network) can be plugged in.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateFleetError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
    UndefinedGainError,
)
from .geo import Voyage

#: Weather channels entering the estimator features, per input case.
#: Case I uses onboard wind only; II external wind/wave/current only;
#: III onboard wind plus external wave/current; IV everything.
FEATURE_CASES: dict[str, tuple[str, ...]] = {
    "I": ("WindSpeed_onb", "WindDirection_onb"),
    "II": (
        "WindSpeed_cps",
        "WindDirection_cps",
        "WindSpeed_sg",
        "WindDirection_sg",
        "WaveHeight",
        "WaveDirection",
        "CurrentSpeed",
        "CurrentDirection",
    ),
    "III": (
        "WindSpeed_onb",
        "WindDirection_onb",
        "WaveHeight",
        "WaveDirection",
        "CurrentSpeed",
        "CurrentDirection",
    ),
    "IV": (
        "WindSpeed_onb",
        "WindDirection_onb",
        "WindSpeed_cps",
        "WindDirection_cps",
        "WindSpeed_sg",
        "WindDirection_sg",
        "WaveHeight",
        "WaveDirection",
        "CurrentSpeed",
        "CurrentDirection",
    ),
}

MIN_TRAINING_SAMPLES = 100
#: Floor applied to suggested speeds when rescaling step durations, m/s.
SPEED_FLOOR = 0.1


@dataclass
class VoyageSummary:
    voyage_id: str
    fuel_total: float  # liters
    time_total: float  # hours
    fuel_norm: float = float("nan")
    time_norm: float = float("nan")
    eff_score: float = float("nan")


@dataclass
class PercentileClusters:
    """Nested top-P% voyage-id sets; Top10Pr is the most exclusive."""

    top75: set[str]
    top50: set[str]
    top25: set[str]
    top10: set[str]

    def as_ordered(self) -> list[tuple[str, set[str]]]:
        return [
            ("Top10Pr", self.top10),
            ("Top25Pr", self.top25),
            ("Top50Pr", self.top50),
            ("Top75Pr", self.top75),
        ]


def voyage_totals(v: Voyage) -> tuple[float, float]:
    """Total fuel (liters, left-rectangle rule) and duration (hours)."""
    if len(v.samples) < 2:
        raise InvalidInputError(f"voyage {v.voyage_id!r}: need >= 2 samples for totals")
    fuel = 0.0
    for a, b in zip(v.samples, v.samples[1:]):
        fuel += a.fuel_rate * (b.timestamp - a.timestamp) / 3600.0
    hours = (v.samples[-1].timestamp - v.samples[0].timestamp) / 3600.0
    return fuel, hours


def efficiency_score(fuel_norm: float, time_norm: float) -> float:
    """1 - harmonic mean of the normalized totals; 1 when both are zero."""
    if fuel_norm == 0.0 and time_norm == 0.0:
        return 1.0
    return 1.0 - 2.0 * fuel_norm * time_norm / (fuel_norm + time_norm)


def normalize_and_score(summaries: Sequence[VoyageSummary]) -> list[VoyageSummary]:
    """Populate fuel_norm, time_norm, and eff_score against fleet maxima."""
    if not summaries:
        raise InvalidInputError("no voyage summaries to score")
    max_fuel = max(s.fuel_total for s in summaries)
    max_time = max(s.time_total for s in summaries)
    if max_fuel <= 0 or max_time <= 0:
        raise DegenerateFleetError(
            f"fleet maxima degenerate (max fuel {max_fuel}, max time {max_time})"
        )
    out = []
    for s in summaries:
        f = s.fuel_total / max_fuel
        t = s.time_total / max_time
        out.append(
            VoyageSummary(
                voyage_id=s.voyage_id,
                fuel_total=s.fuel_total,
                time_total=s.time_total,
                fuel_norm=f,
                time_norm=t,
                eff_score=efficiency_score(f, t),
            )
        )
    return out


def summarize_voyages(voyages: Sequence[Voyage]) -> list[VoyageSummary]:
    """Totals plus normalized scores for a whole fleet."""
    return normalize_and_score(
        [VoyageSummary(v.voyage_id, *voyage_totals(v)) for v in voyages]
    )


def build_percentile_clusters(summaries: Sequence[VoyageSummary]) -> PercentileClusters:
    """Nested Top10/25/50/75 percent sets, ceil-sized, ties by voyage id."""
    m = len(summaries)
    if m < 4:
        raise InsufficientDataError(f"need >= 4 voyages for percentile clusters, got {m}")
    ranked = sorted(summaries, key=lambda s: (-s.eff_score, s.voyage_id))
    ids = [s.voyage_id for s in ranked]

    def top(pct: int) -> set[str]:
        return set(ids[: math.ceil(pct / 100.0 * m)])

    return PercentileClusters(top75=top(75), top50=top(50), top25=top(25), top10=top(10))


def efficiency_gain(meas_score: float, pred_score: float) -> float:
    """Percent change of the efficiency score relative to the measured one."""
    if meas_score <= 0:
        raise UndefinedGainError(f"measured score {meas_score} is not positive")
    return (pred_score - meas_score) / meas_score * 100.0


class KnnRegressor:
    """Inverse-distance-weighted k-NN regression on z-scaled features.

    Queries that coincide exactly with training points return the mean
    target of the zero-distance neighbors, so a one-neighbor exact match
    reproduces its training target.
    """

    def __init__(self, k: int = 5):
        self.k = k
        self._x: np.ndarray | None = None
        self._y: np.ndarray | None = None
        self._mu: np.ndarray | None = None
        self._sigma: np.ndarray | None = None

    def fit(self, features: np.ndarray, targets: np.ndarray) -> "KnnRegressor":
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if len(features) < self.k:
            raise InsufficientDataError(
                f"need >= k={self.k} training samples, got {len(features)}"
            )
        self._mu = features.mean(axis=0)
        sigma = features.std(axis=0)
        sigma[sigma < 1e-12] = 1.0
        self._sigma = sigma
        self._x = (features - self._mu) / sigma
        self._y = targets
        return self

    def _scale(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self._mu) / self._sigma

    def predict(self, features: np.ndarray, chunk: int = 512) -> np.ndarray:
        if self._x is None:
            raise InvalidInputError("regressor is not fitted")
        queries = self._scale(np.atleast_2d(features))
        out = np.empty(len(queries))
        for start in range(0, len(queries), chunk):
            block = queries[start : start + chunk]
            d2 = ((block[:, None, :] - self._x[None, :, :]) ** 2).sum(axis=2)
            kth = np.argpartition(d2, self.k - 1, axis=1)[:, : self.k]
            kd2 = np.take_along_axis(d2, kth, axis=1)
            ky = self._y[kth]
            for row in range(len(block)):
                d = np.sqrt(kd2[row])
                if np.any(d == 0.0):
                    out[start + row] = float(ky[row][d == 0.0].mean())
                else:
                    w = 1.0 / d
                    out[start + row] = float((w * ky[row]).sum() / w.sum())
        return out


def _sample_features(v: Voyage, channels: tuple[str, ...], with_motion: bool) -> np.ndarray:
    rows = []
    for s in v.samples:
        row = [s.position.lat, s.position.lon]
        if with_motion:
            row += [s.sog, s.heading]
        for name in channels:
            if name not in s.weather:
                raise MissingDataError(
                    f"voyage {v.voyage_id!r}: weather channel {name!r} missing"
                )
            row.append(s.weather[name])
        rows.append(row)
    return np.array(rows, dtype=float)


@dataclass
class EfficiencyEstimator:
    """Fuel-rate estimator: (lat, lon, sog, heading, case channels) -> L/h."""

    feature_case: str
    channels: tuple[str, ...]
    regressor: KnnRegressor
    k: int = 5

    def predict_rates(self, v: Voyage, sog_override: np.ndarray | None = None) -> np.ndarray:
        feats = _sample_features(v, self.channels, with_motion=True)
        if sog_override is not None:
            if len(sog_override) != len(v.samples):
                raise InvalidInputError(
                    f"profile length {len(sog_override)} != voyage length {len(v.samples)}"
                )
            feats[:, 2] = sog_override
        return np.maximum(self.regressor.predict(feats), 0.0)


def train_estimator(
    voyages: Sequence[Voyage], feature_case: str = "IV", k: int = 5
) -> EfficiencyEstimator:
    """Fit the nearest-neighbor fuel-rate estimator on a voyage collection."""
    if feature_case not in FEATURE_CASES:
        raise InvalidInputError(
            f"unknown feature case {feature_case!r}; expected one of {sorted(FEATURE_CASES)}"
        )
    if not voyages:
        raise InsufficientDataError("no voyages to train the estimator on")
    channels = FEATURE_CASES[feature_case]
    feats = np.vstack([_sample_features(v, channels, with_motion=True) for v in voyages])
    targets = np.concatenate([[s.fuel_rate for s in v.samples] for v in voyages])
    if len(feats) < MIN_TRAINING_SAMPLES:
        raise InsufficientDataError(
            f"estimator needs >= {MIN_TRAINING_SAMPLES} samples, got {len(feats)}"
        )
    reg = KnnRegressor(k=k).fit(feats, targets)
    return EfficiencyEstimator(feature_case=feature_case, channels=channels, regressor=reg, k=k)


def estimate_fuel_time(
    profile: Sequence[float], context: Voyage, est: EfficiencyEstimator
) -> tuple[float, float]:
    """Fuel and time totals for a suggested speed profile over a voyage.

    Step durations are rescaled by measured/suggested speed so distance
    over ground is preserved; suggested speeds are floored at 0.1 m/s to
    keep durations finite. Fuel integrates predicted rates with the
    left-rectangle rule over the rescaled durations.
    """
    sog_pred = np.asarray(profile, dtype=float)
    if len(sog_pred) != len(context.samples):
        raise InvalidInputError(
            f"profile length {len(sog_pred)} != voyage length {len(context.samples)}"
        )
    rates = est.predict_rates(context, sog_override=sog_pred)
    fuel = 0.0
    hours = 0.0
    for i in range(len(context.samples) - 1):
        dt = context.samples[i + 1].timestamp - context.samples[i].timestamp
        scaled = dt * context.samples[i].sog / max(sog_pred[i], SPEED_FLOOR)
        fuel += rates[i] * scaled / 3600.0
        hours += scaled / 3600.0
    return float(fuel), float(hours)


def write_summary_csv(
    summaries: Sequence[VoyageSummary],
    clusters: PercentileClusters,
    path: str | Path,
) -> None:
    """Emit the per-voyage summary table with cluster membership columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "voyage_id",
                "fuel_total",
                "time_total",
                "fuel_norm",
                "time_norm",
                "eff_score",
                "top75",
                "top50",
                "top25",
                "top10",
            ]
        )
        for s in sorted(summaries, key=lambda s: s.voyage_id):
            writer.writerow(
                [
                    s.voyage_id,
                    repr(float(s.fuel_total)),
                    repr(float(s.time_total)),
                    repr(float(s.fuel_norm)),
                    repr(float(s.time_norm)),
                    repr(float(s.eff_score)),
                    int(s.voyage_id in clusters.top75),
                    int(s.voyage_id in clusters.top50),
                    int(s.voyage_id in clusters.top25),
                    int(s.voyage_id in clusters.top10),
                ]
            )


def read_summary_csv(path: str | Path) -> tuple[list[VoyageSummary], PercentileClusters]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        summaries: list[VoyageSummary] = []
        clusters = PercentileClusters(set(), set(), set(), set())
        for row in reader:
            summaries.append(
                VoyageSummary(
                    voyage_id=row["voyage_id"],
                    fuel_total=float(row["fuel_total"]),
                    time_total=float(row["time_total"]),
                    fuel_norm=float(row["fuel_norm"]),
                    time_norm=float(row["time_norm"]),
                    eff_score=float(row["eff_score"]),
                )
            )
            for flag, bucket in (
                ("top75", clusters.top75),
                ("top50", clusters.top50),
                ("top25", clusters.top25),
                ("top10", clusters.top10),
            ):
                if row[flag] == "1":
                    bucket.add(row["voyage_id"])
    return summaries, clusters
