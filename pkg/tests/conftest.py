import pathlib

import numpy as np
import pytest

from poolkit import parse_instance

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "poolkit" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def haverly1():
    return parse_instance(DATA / "haverly1.json")


@pytest.fixture(scope="session")
def haverly2():
    return parse_instance(DATA / "haverly2.json")


@pytest.fixture(scope="session")
def haverly3():
    return parse_instance(DATA / "haverly3.json")


@pytest.fixture(scope="session")
def bental4():
    return parse_instance(DATA / "bental4.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_schedule(n_sp1=4, n_sp2=4, demands=5, qty=10.0, dqty=12.0):
    """Synthetic two-stockpile schedule used by mining tests."""
    from poolkit.instances import Demand, MiningSchedule, Supply

    supplies = []
    for k in range(n_sp1):
        supplies.append(Supply("sp1", 2 * k + 1, qty, (1.0, 2.0)))
    for k in range(n_sp2):
        supplies.append(Supply("sp2", 2 * k + 2, qty, (2.0, 1.0)))
    total = qty * (n_sp1 + n_sp2)
    dem = []
    for k in range(demands):
        dem.append(Demand(2 * k + 2.5, min(dqty, total / max(demands, 1)),
                          (1.8, 1.8), (5.0, 5.0)))
    return MiningSchedule(("sp1", "sp2"), tuple(supplies), tuple(dem))
