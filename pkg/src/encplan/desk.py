"""Bundled 5-bus desk system: deterministic generator for the demo dataset.

Five buses, six lines, five generators (two with real commitment decisions:
a coal unit and a gas combined-cycle; plus three commitment-free units), a
congestible load pocket at bus b3, wind at b4, solar at b5, and a full year
of hourly load/renewable profiles.  Economics are tuned so that storage
arbitrage moves energy from cheap, emissions-heavy night generation into the
evening peak: the configuration where an emissions-neutrality constraint has
teeth.
"""

from __future__ import annotations

import numpy as np

from .system_model import (Bus, Line, Generator, Segment, StorageSpec,
                           PowerSystem, save_system)

DESK_SEED = 2024

_BASE_LOAD = {"b1": 26.0, "b2": 57.0, "b3": 70.0, "b4": 34.0, "b5": 41.0}
_PEAK_HOUR = {"b1": 14, "b2": 18, "b3": 18, "b4": 19, "b5": 19}
_SWING = {"b1": 0.15, "b2": 0.32, "b3": 0.35, "b4": 0.30, "b5": 0.28}
_WIND_CAP = 90.0
_SOLAR_CAP = 70.0


def desk_buses():
    return (
        Bus("b1", candidate_storage=False),
        Bus("b2", candidate_storage=True),
        Bus("b3", candidate_storage=True),
        Bus("b4", candidate_storage=False),
        Bus("b5", candidate_storage=True),
    )


def desk_lines():
    return (
        Line("L1", "b1", "b2", 1.0, 200.0),
        Line("L2", "b1", "b3", 1.1, 45.0),
        Line("L3", "b2", "b3", 0.9, 45.0),
        Line("L4", "b2", "b4", 1.0, 150.0),
        Line("L5", "b4", "b5", 1.2, 120.0),
        Line("L6", "b5", "b1", 1.0, 150.0),
    )


def desk_generators():
    return (
        Generator("coal1", "b1", 40.0, 140.0,
                  (Segment(60.0, 25.0, 1.02), Segment(40.0, 28.0, 1.08)),
                  cost_min=900.0, cost_startup=3500.0,
                  emis_min=44.0, emis_startup=20.0, min_up=5, min_down=5),
        Generator("gascc1", "b2", 25.0, 120.0,
                  (Segment(50.0, 32.0, 0.37), Segment(45.0, 38.0, 0.41)),
                  cost_min=900.0, cost_startup=1500.0,
                  emis_min=10.5, emis_startup=4.0, min_up=3, min_down=3),
        Generator("gaspk1", "b3", 0.0, 90.0,
                  (Segment(90.0, 75.0, 0.56),),
                  cost_min=0.0, cost_startup=0.0,
                  emis_min=0.0, emis_startup=0.0, min_up=1, min_down=1),
        Generator("oilpk1", "b4", 0.0, 65.0,
                  (Segment(65.0, 130.0, 0.85),),
                  cost_min=0.0, cost_startup=0.0,
                  emis_min=0.0, emis_startup=0.0, min_up=1, min_down=1),
        Generator("hydro1", "b5", 0.0, 55.0,
                  (Segment(55.0, 6.0, 0.0),),
                  cost_min=0.0, cost_startup=0.0,
                  emis_min=0.0, emis_startup=0.0, min_up=1, min_down=1),
    )


def desk_storage_spec():
    return StorageSpec(duration=4.0, efficiency=0.9, unit_power=25.0)


def desk_system(days: int = 365, seed: int = DESK_SEED) -> PowerSystem:
    """Build the desk system with `days` days of synthetic hourly profiles."""
    rng = np.random.default_rng(seed)
    hours = np.arange(24)
    day_idx = np.arange(days)

    season = 1.0 + 0.18 * np.cos(2 * np.pi * (day_idx - 15) / 365.0)
    weekday = np.where(day_idx % 7 >= 5, 0.93, 1.0)

    demand = {}
    for bus, base in _BASE_LOAD.items():
        shape = 1.0 - _SWING[bus] * np.cos(2 * np.pi * (hours - _PEAK_HOUR[bus]) / 24.0)
        shape = shape + 0.08 * np.exp(-0.5 * ((hours - 8.0) / 2.0) ** 2)
        noise = 1.0 + 0.02 * rng.standard_normal((days, 24))
        arr = base * season[:, None] * weekday[:, None] * shape[None, :] * noise
        demand[bus] = np.clip(arr, 0.0, None)

    # wind: night-leaning diurnal shape, AR(1) daily weather
    weather = np.empty(days)
    w = 0.5
    for d in range(days):
        w = 0.72 * w + 0.28 * rng.uniform(0.05, 1.0)
        weather[d] = w
    wind_shape = 0.75 - 0.25 * np.cos(2 * np.pi * (hours - 3.0) / 24.0)
    wind_season = 1.0 + 0.25 * np.cos(2 * np.pi * (day_idx - 45) / 365.0)
    gust = np.clip(1.0 + 0.10 * rng.standard_normal((days, 24)), 0.0, None)
    wind = _WIND_CAP * weather[:, None] * wind_season[:, None] * wind_shape[None, :] * gust
    wind = np.clip(wind, 0.0, _WIND_CAP)

    # solar: clear-sky bell with daily cloud factor
    bell = np.clip(np.cos((hours - 12.5) / 6.2), 0.0, None) ** 1.5
    solar_season = 1.0 - 0.30 * np.cos(2 * np.pi * (day_idx - 172) / 365.0)
    cloud = np.clip(rng.beta(5, 2, days), 0.05, 1.0)
    solar = _SOLAR_CAP * cloud[:, None] * solar_season[:, None] * bell[None, :]
    solar = np.clip(solar, 0.0, _SOLAR_CAP)

    renewables = {"b4": wind, "b5": solar}
    return PowerSystem(desk_buses(), desk_lines(), desk_generators(),
                       demand, renewables, desk_storage_spec())


def write_desk_dataset(directory, days: int = 365, seed: int = DESK_SEED) -> PowerSystem:
    """Materialize the desk system as CSVs in `directory`; returns the system."""
    sys = desk_system(days=days, seed=seed)
    save_system(sys, directory)
    return sys
