"""Shared fixtures: tiny hand-built voyages and small synthetic fleets."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from voyagekit.geo import GeoPoint, SamplePoint, Voyage
from voyagekit.synth import Branch, SyntheticFleetSpec, WeatherRegime, generate_fleet

settings.register_profile(
    "det", derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("det")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one PASS/FAIL line per acceptance criterion."""
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and rep.when == "call":
        verdict = "PASS" if rep.passed else "FAIL"
        print(f"\nACCEPTANCE {marker.args[0]}: {verdict} - {marker.args[1]}")


def make_sample(
    ts: float,
    lat: float = 0.0,
    lon: float = 0.0,
    sog: float = 5.0,
    heading: float = 90.0,
    fuel_rate: float = 50.0,
    weather: dict | None = None,
) -> SamplePoint:
    return SamplePoint(
        timestamp=ts,
        position=GeoPoint(lat, lon),
        sog=sog,
        heading=heading,
        fuel_rate=fuel_rate,
        weather=dict(weather or {}),
    )


def make_voyage(voyage_id: str = "V0001", n: int = 5, period: float = 60.0, **kwargs) -> Voyage:
    return Voyage(
        voyage_id=voyage_id,
        samples=[make_sample(i * period, lon=0.001 * i, **kwargs) for i in range(n)],
    )


def tiny_fleet_spec(seed: int = 11, voyages_per_branch: int = 4) -> SyntheticFleetSpec:
    """Small, fast fleet: short route, mild branch offsets."""
    return SyntheticFleetSpec(
        branches=[
            Branch("mid", [(0.0, 0.0), (0.0, 0.2)]),
            Branch("north", [(0.0, 0.0), (0.12, 0.07), (0.12, 0.13), (0.0, 0.2)]),
            Branch("south", [(0.0, 0.0), (-0.12, 0.07), (-0.12, 0.13), (0.0, 0.2)]),
        ],
        voyages_per_branch=voyages_per_branch,
        noise_std_deg=0.01,
        sample_period_s=60.0,
        skill_range=(0.9, 1.0),
        seed=seed,
    )


@pytest.fixture(scope="session")
def tiny_fleet():
    return generate_fleet(tiny_fleet_spec())


def optimization_fleet_spec(seed: int = 7) -> SyntheticFleetSpec:
    """Fleet sized for the speed-optimization benchmark: 60 voyages.

    Speeds sit well below the fuel-per-distance optimum of the quadratic
    burn model, so faster is cheaper in both fuel and time everywhere and
    the per-state speed rules have a well-defined quality ordering. Calm
    weather dominates the dwell mix so the calm max-speed rule carries the
    aggregate.
    """
    return SyntheticFleetSpec(
        branches=[
            Branch("inner", [(0.0, 0.0), (0.0, 0.45)]),
            Branch("outer", [(0.05, 0.0), (0.09, 0.22), (0.05, 0.45)]),
        ],
        voyages_per_branch=30,
        noise_std_deg=0.005,
        sample_period_s=60.0,
        regimes=(
            WeatherRegime("calm", wind_mean=3.0, wind_std=0.7, wave_mean=0.4,
                          wave_std=0.1, dwell_hours=4.0, base_sog=13.0),
            WeatherRegime("moderate", wind_mean=8.0, wind_std=0.9, wave_mean=1.2,
                          wave_std=0.18, dwell_hours=2.5, base_sog=10.0),
            WeatherRegime("rough", wind_mean=14.0, wind_std=1.2, wave_mean=2.6,
                          wave_std=0.3, dwell_hours=1.5, base_sog=7.0),
        ),
        skill_range=(0.95, 1.0),
        sog_noise=0.1,
        fuel_a=40.0,
        fuel_b=0.2,
        fuel_c=3.0,
        gap_s=1800.0,
        seed=seed,
    )


@pytest.fixture(scope="session")
def optimization_fleet():
    return generate_fleet(optimization_fleet_spec())


def pathid_fleet_spec(seed: int = 31, voyages_per_branch: int = 34) -> SyntheticFleetSpec:
    """Three well-separated branches (>= 0.5 deg apart, noise 0.05 deg)."""
    return SyntheticFleetSpec(
        branches=[
            Branch("direct", [(0.0, 0.0), (0.0, 0.5)]),
            Branch("north", [(0.0, 0.0), (0.55, 0.2), (0.55, 0.3), (0.0, 0.5)]),
            Branch("south", [(0.0, 0.0), (-0.55, 0.2), (-0.55, 0.3), (0.0, 0.5)]),
        ],
        voyages_per_branch=voyages_per_branch,
        noise_std_deg=0.05,
        sample_period_s=120.0,
        skill_range=(0.85, 1.0),
        seed=seed,
    )


@pytest.fixture(scope="session")
def pathid_fleet():
    spec = pathid_fleet_spec()
    fleet = generate_fleet(spec)
    assert len(fleet.voyages) >= 100
    return fleet


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
