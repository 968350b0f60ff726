import itertools

import numpy as np
import pytest

from coded_offload.coding import select_split
from coded_offload.config import build_instance, build_scenarios, load_config
from coded_offload.energy import (
    BsSpec,
    CostCoefficients,
    CostRates,
    NetworkInstance,
    RadioConstants,
    RotorcraftParams,
    UavSpec,
)
from coded_offload.scenarios import Scenario, ScenarioSet, validate

REF_ROTOR = RotorcraftParams(
    weight_force=10.2 * 9.8,
    air_density=1.225,
    rotor_radius=0.5,
    disc_area=0.79,
    blade_angular_velocity=400.0,
    tip_speed=200.0,
    rotor_solidity=0.05,
    fuselage_drag_ratio=0.3,
    induced_velocity_hover=7.2,
    profile_drag_coeff=0.012,
    induced_power_factor=0.1,
)
REF_RADIO = RadioConstants(noise_power=1e-13, reference_gain=1e-6)


def ref_uav(x=0.0, y=0.0, h=100.0) -> UavSpec:
    return UavSpec((x, y, h), 1e9, 20.0, 2e6, 0.032, 0.032, REF_ROTOR)


def ref_bs(x=0.0, y=0.0, workers=15) -> BsSpec:
    return BsSpec((x, y, 20.0), 20e9, workers, 0.2)


def toy_instance(Y: int, capacities, m: int = 2) -> NetworkInstance:
    """Physically arbitrary instance; tests pair it with explicit CostRates."""
    return NetworkInstance(
        tuple(ref_uav(10.0 * y) for y in range(Y)),
        tuple(ref_bs(5.0 * f, 300.0, n) for f, n in enumerate(capacities)),
        select_split(m),
        REF_RADIO,
        CostCoefficients(0.6, 0.0004),
    )


def random_rates(rng, Y, F) -> list[CostRates]:
    out = []
    for _ in range(Y):
        if rng.random() < 0.5:
            # small integers make cost ties common, which exercises tie-breaking
            local = float(rng.integers(0, 8))
            off = tuple(float(v) for v in rng.integers(0, 8, size=F))
            corr = local + float(rng.integers(0, 10))
            dec = float(rng.integers(0, 3))
        else:
            local = float(rng.uniform(0, 10))
            off = tuple(float(v) for v in rng.uniform(0, 10, size=F))
            corr = local + float(rng.uniform(0, 20))
            dec = float(rng.uniform(0, 3))
        out.append(CostRates(local, off, dec, corr))
    return out


def random_scenarios(rng, Y, k, max_scenarios=8, max_shortfall=None) -> ScenarioSet:
    a_hi = k if max_shortfall is None else min(k, max_shortfall)
    n = int(rng.integers(1, max_scenarios + 1))
    weights = rng.random(n) + 0.05
    weights /= weights.sum()
    scen = []
    for w in weights:
        flags = tuple(int(v) for v in rng.integers(0, 2, size=Y))
        shortfalls = tuple(int(rng.integers(1, a_hi + 1)) if f else 0 for f in flags)
        scen.append(Scenario(flags, shortfalls, float(w)))
    return validate(ScenarioSet(tuple(scen), Y), k)


def random_problem(seed, max_uavs=3, max_bs=2, max_workers=5, max_shortfall=3):
    rng = np.random.default_rng(seed)
    Y = int(rng.integers(1, max_uavs + 1))
    F = int(rng.integers(1, max_bs + 1))
    caps = [int(v) for v in rng.integers(1, max_workers + 1, size=F)]
    inst = toy_instance(Y, caps, m=int(rng.choice([1, 2])))
    return inst, random_rates(rng, Y, F), random_scenarios(rng, Y, inst.k, max_shortfall=max_shortfall)


@pytest.fixture(scope="session")
def default_config():
    return load_config(None)


@pytest.fixture(scope="session")
def default_instance(default_config):
    return build_instance(default_config)


@pytest.fixture(scope="session")
def default_scenarios(default_config, default_instance):
    return build_scenarios(default_config, default_instance.uav_count, default_instance.k)
