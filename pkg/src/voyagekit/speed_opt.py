"""Speed-profile predictors and the per-cluster efficiency-gain benchmark.

Three predictors are built in: a per-sample kNN regression on position and
weather, retrieval of the most DTW-similar efficient profile, and the
weather-state HMM speed rule. The benchmark trains each predictor on each
percentile cluster, scores measured and suggested profiles through one
shared fuel/time estimator, and aggregates efficiency gains per cluster
and per decoded weather state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dataclasses_field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .efficiency import (
    FEATURE_CASES,
    EfficiencyEstimator,
    KnnRegressor,
    PercentileClusters,
    efficiency_gain,
    efficiency_score,
    estimate_fuel_time,
)
from .errors import (
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
    UndefinedGainError,
    VoyagekitError,
)
from .geo import Voyage
from .hmm import DEFAULT_FEATURES, STATE_NAMES, decode_states, fit_weather_hmm, hmm_predict

MODEL_ORDER = ("kNN", "1NN-DTW", "HMM")


@dataclass
class SpeedProfile:
    """A voyage's speed-over-ground sequence (m/s, finite, non-negative)."""

    voyage_id: str
    sog: np.ndarray

    def __post_init__(self):
        self.sog = np.asarray(self.sog, dtype=float)
        if len(self.sog) == 0:
            raise InvalidInputError(f"profile {self.voyage_id!r} is empty")
        if not np.all(np.isfinite(self.sog)) or np.any(self.sog < 0):
            raise InvalidInputError(
                f"profile {self.voyage_id!r} has non-finite or negative speeds"
            )

    @classmethod
    def from_voyage(cls, v: Voyage) -> "SpeedProfile":
        return cls(v.voyage_id, np.array([s.sog for s in v.samples]))


def dtw_distance(x: Sequence[float], y: Sequence[float]) -> float:
    """Classic dynamic-time-warping cost with |a - b| local cost.

    Full alignment lattice, match/insert/delete steps, no warping window.
    """
    if len(x) == 0 or len(y) == 0:
        raise InvalidInputError("dtw_distance requires non-empty sequences")
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    inf = float("inf")
    prev = [inf] * (len(ys) + 1)
    prev[0] = 0.0
    for xi in xs:
        curr = [inf] * (len(ys) + 1)
        for j, yj in enumerate(ys, start=1):
            cost = abs(xi - yj)
            curr[j] = cost + min(prev[j - 1], prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def linear_resample(values: np.ndarray, n: int) -> np.ndarray:
    """Resample a sequence to length n by linear interpolation."""
    values = np.asarray(values, dtype=float)
    if n < 1:
        raise InvalidInputError(f"cannot resample to length {n}")
    if len(values) == 1:
        return np.full(n, values[0])
    src = np.linspace(0.0, 1.0, len(values))
    dst = np.linspace(0.0, 1.0, n)
    return np.interp(dst, src, values)


def predict_1nn_dtw(test: SpeedProfile, cluster: Sequence[SpeedProfile]) -> SpeedProfile:
    """Most DTW-similar cluster profile, resampled to the test length.

    Ties break toward the lowest voyage id.
    """
    if not cluster:
        raise InsufficientDataError("1NN-DTW needs a non-empty training cluster")
    best: SpeedProfile | None = None
    best_cost = float("inf")
    for candidate in sorted(cluster, key=lambda p: p.voyage_id):
        cost = dtw_distance(test.sog, candidate.sog)
        if cost < best_cost:
            best_cost = cost
            best = candidate
    return SpeedProfile(best.voyage_id, linear_resample(best.sog, len(test.sog)))


def _speed_features(v: Voyage, channels: tuple[str, ...]) -> np.ndarray:
    rows = []
    for s in v.samples:
        row = [s.position.lat, s.position.lon]
        for name in channels:
            if name not in s.weather:
                raise MissingDataError(
                    f"voyage {v.voyage_id!r}: weather channel {name!r} missing"
                )
            row.append(s.weather[name])
        rows.append(row)
    return np.array(rows, dtype=float)


def knn_predict(
    test: Voyage,
    cluster: Sequence[Voyage],
    k: int = 5,
    feature_case: str = "IV",
) -> SpeedProfile:
    """Per-sample kNN speed prediction from (lat, lon, case weather channels)."""
    channels = FEATURE_CASES[feature_case]
    train_x = np.vstack([_speed_features(v, channels) for v in cluster])
    train_y = np.concatenate([[s.sog for s in v.samples] for v in cluster])
    reg = KnnRegressor(k=k).fit(train_x, train_y)
    pred = np.maximum(reg.predict(_speed_features(test, channels)), 0.0)
    return SpeedProfile(test.voyage_id, pred)


class SpeedModel(Protocol):
    """Interface the benchmark driver trains and queries per cluster."""

    def fit(self, cluster: Sequence[Voyage]) -> None: ...

    def predict(self, test: Voyage) -> SpeedProfile: ...


class KnnSpeedModel:
    def __init__(self, k: int = 5, feature_case: str = "IV"):
        self.k = k
        self.feature_case = feature_case
        self._cluster: list[Voyage] = []

    def fit(self, cluster: Sequence[Voyage]) -> None:
        n = sum(len(v.samples) for v in cluster)
        if n < self.k:
            raise InsufficientDataError(f"kNN needs >= {self.k} samples, got {n}")
        self._cluster = list(cluster)

    def predict(self, test: Voyage) -> SpeedProfile:
        return knn_predict(test, self._cluster, k=self.k, feature_case=self.feature_case)


class DtwSpeedModel:
    def __init__(self):
        self._profiles: list[SpeedProfile] = []

    def fit(self, cluster: Sequence[Voyage]) -> None:
        if not cluster:
            raise InsufficientDataError("1NN-DTW needs a non-empty training cluster")
        self._profiles = [SpeedProfile.from_voyage(v) for v in cluster]

    def predict(self, test: Voyage) -> SpeedProfile:
        retrieved = predict_1nn_dtw(SpeedProfile.from_voyage(test), self._profiles)
        return SpeedProfile(test.voyage_id, retrieved.sog)


class HmmSpeedModel:
    def __init__(self, seed: int = 0, features: tuple[str, ...] = DEFAULT_FEATURES):
        self.seed = seed
        self.features = features
        self.model = None

    def fit(self, cluster: Sequence[Voyage]) -> None:
        self.model = fit_weather_hmm(cluster, seed=self.seed, features=self.features)

    def predict(self, test: Voyage) -> SpeedProfile:
        return SpeedProfile(test.voyage_id, hmm_predict(test, self.model))


class IdentitySpeedModel:
    """Returns the measured profile unchanged; a zero-gain reference."""

    def fit(self, cluster: Sequence[Voyage]) -> None:
        pass

    def predict(self, test: Voyage) -> SpeedProfile:
        return SpeedProfile.from_voyage(test)


def default_models(
    k: int = 5,
    feature_case: str = "IV",
    hmm_seed: int = 0,
    hmm_features: tuple[str, ...] = DEFAULT_FEATURES,
) -> dict[str, SpeedModel]:
    return {
        "kNN": KnnSpeedModel(k=k, feature_case=feature_case),
        "1NN-DTW": DtwSpeedModel(),
        "HMM": HmmSpeedModel(seed=hmm_seed, features=hmm_features),
    }


@dataclass
class ClusterModelGain:
    cluster: str
    model: str
    avg_gain_pct: float | None
    improved_count: int | None
    evaluated: int
    excluded: int
    status: str  # "ok" or "insufficient"
    voyage_gains: dict[str, float] = dataclasses_field(default_factory=dict)
    profiles: dict[str, np.ndarray] = dataclasses_field(default_factory=dict)


@dataclass
class StateGain:
    model: str
    weather_state: str
    avg: float
    std: float
    steps: int


@dataclass
class GainReport:
    rows: list[ClusterModelGain]
    state_rows: list[StateGain]
    test_size: int

    def row(self, cluster: str, model: str) -> ClusterModelGain:
        for r in self.rows:
            if r.cluster == cluster and r.model == model:
                return r
        raise KeyError((cluster, model))


def run_optimization_benchmark(
    clusters: PercentileClusters,
    train_voyages: Sequence[Voyage],
    test_voyages: Sequence[Voyage],
    estimator: EfficiencyEstimator,
    models: Mapping[str, SpeedModel] | None = None,
    *,
    hmm_seed: int = 0,
    hmm_features: tuple[str, ...] = DEFAULT_FEATURES,
    knn_k: int = 5,
    feature_case: str = "IV",
    keep_profiles: bool = False,
) -> GainReport:
    """Train each model on each percentile cluster and score the test set.

    Measured and suggested profiles go through the same estimator and
    duration-rescaling path, so a model that echoes the measured profile
    gains exactly zero. Scores are normalized by the test set's measured
    maxima. Per-state rows pool step-level gains across clusters, with
    states decoded by the cluster's weather HMM.
    """
    if not test_voyages:
        raise InvalidInputError("benchmark needs a non-empty test set")
    by_id = {v.voyage_id: v for v in train_voyages}
    if models is None:
        models = default_models(
            k=knn_k, feature_case=feature_case, hmm_seed=hmm_seed, hmm_features=hmm_features
        )

    # Measured baselines, shared across every (cluster, model) cell. Scores
    # are normalized by the fleet-wide (train + test) measured maxima so the
    # scale matches the fleet-level scoring convention.
    meas_ft = {
        v.voyage_id: estimate_fuel_time([s.sog for s in v.samples], v, estimator)
        for v in test_voyages
    }
    fleet_ft = list(meas_ft.values()) + [
        estimate_fuel_time([s.sog for s in v.samples], v, estimator)
        for v in train_voyages
    ]
    max_fuel = max(f for f, _ in fleet_ft)
    max_time = max(t for _, t in fleet_ft)
    if max_fuel <= 0 or max_time <= 0:
        raise InvalidInputError("measured fuel/time maxima are not positive")

    def score(fuel: float, hours: float) -> float:
        return efficiency_score(fuel / max_fuel, hours / max_time)

    meas_score = {vid: score(f, t) for vid, (f, t) in meas_ft.items()}

    rows: list[ClusterModelGain] = []
    state_pool: dict[str, dict[str, list[float]]] = {
        name: {s: [] for s in STATE_NAMES} for name in models
    }
    test_ids = {v.voyage_id for v in test_voyages}
    for cluster_name, member_ids in clusters.as_ordered():
        cluster_voyages = [by_id[vid] for vid in sorted(member_ids) if vid in by_id]
        if test_ids & member_ids:
            raise InvalidInputError(
                f"test voyages overlap training cluster {cluster_name}"
            )
        try:
            state_model = fit_weather_hmm(
                cluster_voyages, seed=hmm_seed, features=hmm_features
            )
            decoded = {v.voyage_id: decode_states(v, state_model) for v in test_voyages}
        except VoyagekitError:
            decoded = None
        for model_name, model in models.items():
            try:
                model.fit(cluster_voyages)
            except VoyagekitError:
                rows.append(
                    ClusterModelGain(
                        cluster=cluster_name,
                        model=model_name,
                        avg_gain_pct=None,
                        improved_count=None,
                        evaluated=0,
                        excluded=0,
                        status="insufficient",
                        voyage_gains={},
                    )
                )
                continue
            gains: dict[str, float] = {}
            profiles: dict[str, np.ndarray] = {}
            excluded = 0
            for v in test_voyages:
                profile = model.predict(v)
                if keep_profiles:
                    profiles[v.voyage_id] = profile.sog
                fuel, hours = estimate_fuel_time(profile.sog, v, estimator)
                try:
                    gains[v.voyage_id] = efficiency_gain(
                        meas_score[v.voyage_id], score(fuel, hours)
                    )
                except UndefinedGainError:
                    excluded += 1
            avg = float(np.mean(list(gains.values()))) if gains else None
            improved = sum(1 for g in gains.values() if g > 0)
            rows.append(
                ClusterModelGain(
                    cluster=cluster_name,
                    model=model_name,
                    avg_gain_pct=avg,
                    improved_count=improved,
                    evaluated=len(gains),
                    excluded=excluded,
                    status="ok",
                    voyage_gains=gains,
                    profiles=profiles,
                )
            )
            if decoded is not None:
                for vid, gain in gains.items():
                    for state in decoded[vid]:
                        state_pool[model_name][STATE_NAMES[state]].append(gain)

    state_rows = [
        StateGain(
            model=model_name,
            weather_state=state,
            avg=float(np.mean(pool)) if pool else float("nan"),
            std=float(np.std(pool)) if pool else float("nan"),
            steps=len(pool),
        )
        for model_name in models
        for state, pool in state_pool[model_name].items()
    ]
    return GainReport(rows=rows, state_rows=state_rows, test_size=len(test_voyages))


def write_gain_report(report: GainReport, gains_path: str | Path, states_path: str | Path) -> None:
    """Emit the per-cluster and per-weather-state gain tables as CSV."""
    with open(gains_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "model", "eff_gain_pct", "improved_count", "status"])
        for r in report.rows:
            writer.writerow(
                [
                    r.cluster,
                    r.model,
                    "" if r.avg_gain_pct is None else repr(float(r.avg_gain_pct)),
                    "" if r.improved_count is None else r.improved_count,
                    r.status,
                ]
            )
    with open(states_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "weather_state", "avg", "std"])
        for r in report.state_rows:
            writer.writerow([r.model, r.weather_state, repr(float(r.avg)), repr(float(r.std))])
