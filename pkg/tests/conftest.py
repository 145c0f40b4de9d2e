import numpy as np
import pytest

from encplan.desk import desk_system
from encplan.scenario import downsample
from encplan.system_model import (Bus, Line, Generator, Segment, StorageSpec,
                                  PowerSystem, EconomicParams, DailyProfile)


@pytest.fixture(scope="session")
def desk():
    """Full 365-day desk system (also exercises generation determinism)."""
    return desk_system()


@pytest.fixture(scope="session")
def desk90():
    return desk_system(days=90, seed=7)


def mini_days(system, days=(15, 200), horizon=8):
    """Equal-weight representative days from specific desk days, compressed."""
    out = []
    w = 1.0 / len(days)
    for d in days:
        prof = DailyProfile({b: np.array(system.demand[b][d]) for b in system.demand},
                            {b: np.array(system.renewables[b][d])
                             for b in system.renewables}, 24)
        out.append((downsample(prof, horizon), w))
    return out


def priced(system, effective_price):
    """Same grid with the storage technology repriced ($ per MW-yr)."""
    return PowerSystem(system.buses, system.lines, system.generators,
                       dict(system.demand), dict(system.renewables),
                       system.storage.with_effective_price(effective_price))


def one_bus_toy():
    """Single bus, one 100 MW unit at $20/MWh and 0.5 t/MWh, flat 50 MW load."""
    buses = (Bus("n1", candidate_storage=True),)
    gens = (Generator("gen1", "n1", 0.0, 100.0,
                      (Segment(100.0, 20.0, 0.5),), 0, 0, 0, 0, 1, 1),)
    demand = {"n1": np.full((1, 24), 50.0)}
    return PowerSystem(buses, (), gens, demand, {}, StorageSpec())


def one_bus_profile(hours=4, load=50.0):
    return DailyProfile({"n1": np.full(hours, load)}, {}, hours)


def two_bus_congested():
    """$10 source bus feeding a 70 MW pocket through a 40 MW line; a $50
    local unit covers the remainder, so pocket LMP separates to 50."""
    buses = (Bus("s1"), Bus("s2", candidate_storage=True))
    lines = (Line("T1", "s1", "s2", 1.0, 40.0),)
    gens = (Generator("cheap", "s1", 0, 200, (Segment(200, 10.0, 0.9),),
                      0, 0, 0, 0, 1, 1),
            Generator("local", "s2", 0, 100, (Segment(100, 50.0, 0.4),),
                      0, 0, 0, 0, 1, 1))
    demand = {"s2": np.full((1, 24), 70.0)}
    return PowerSystem(buses, lines, gens, demand, {}, StorageSpec())


def two_bus_profile(hours=4, load=70.0):
    return DailyProfile({"s2": np.full(hours, load)}, {}, hours)


@pytest.fixture
def econ0():
    return EconomicParams()
