"""Run configuration: strict TOML parsing with the reference defaults.

Every section and key is optional; omitted values fall back to the defaults
below.  Unknown keys are rejected.  Physical quantities may be given either
as plain numbers (SI, linear) or as strings with a unit, e.g.
``noise_power = "-100 dBm"`` or ``bandwidth = "2 MHz"``; both end up as
linear SI values.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coding import CodingParams, select_split
from .energy import (
    GRAVITY,
    BsSpec,
    CostCoefficients,
    NetworkInstance,
    RadioConstants,
    RotorcraftParams,
    UavSpec,
)
from .errors import ConfigError, ValidationError
from .scenarios import DEFAULT_SCENARIO_CAP, ScenarioSet, generate_independent, read_scenarios, validate

# unit -> (dimension, converter to SI)
_UNITS = {
    "hz": ("frequency", lambda v: v),
    "khz": ("frequency", lambda v: v * 1e3),
    "mhz": ("frequency", lambda v: v * 1e6),
    "ghz": ("frequency", lambda v: v * 1e9),
    "w": ("power", lambda v: v),
    "mw": ("power", lambda v: v * 1e-3),
    "dbw": ("power", lambda v: 10 ** (v / 10)),
    "dbm": ("power", lambda v: 10 ** (v / 10) * 1e-3),
    "db": ("ratio", lambda v: 10 ** (v / 10)),
    "m": ("length", lambda v: v),
    "km": ("length", lambda v: v * 1e3),
    "kg": ("mass", lambda v: v),
    "s": ("time", lambda v: v),
}
_QUANTITY = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


def parse_quantity(value: Any, dimension: str | None, path: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a number or quantity string, got {value!r}")
    match = _QUANTITY.match(value.replace("−", "-"))
    if not match:
        raise ConfigError(path, f"cannot parse quantity {value!r}")
    number, unit = float(match.group(1)), match.group(2).lower()
    if unit not in _UNITS:
        raise ConfigError(path, f"unknown unit {match.group(2)!r}")
    unit_dim, convert = _UNITS[unit]
    if dimension is not None and unit_dim != dimension:
        raise ConfigError(path, f"unit {match.group(2)!r} is a {unit_dim}, expected a {dimension}")
    return convert(number)


def _q(default, dimension=None, positive=True):
    return field(default=default, metadata={"dimension": dimension, "positive": positive})


@dataclass(frozen=True)
class CodingSection:
    N: int = 1000
    m: int = 2
    s: float | None = None
    t: int | None = None
    split_mode: str = "stationary"
    bits_per_symbol: float = _q(64.0)


@dataclass(frozen=True)
class RotorcraftSection:
    weight: float = _q(10.2, "mass")
    weight_is_force: bool = False
    gravity: float = _q(GRAVITY)
    air_density: float = _q(1.225)
    rotor_radius: float = _q(0.5, "length")
    disc_area: float = _q(0.79)
    blade_angular_velocity: float = _q(400.0)
    tip_speed: float = _q(200.0)
    rotor_solidity: float = _q(0.05)
    fuselage_drag_ratio: float = _q(0.3)
    induced_velocity_hover: float = _q(7.2)
    profile_drag_coeff: float = _q(0.012)
    induced_power_factor: float = _q(0.1)


@dataclass(frozen=True)
class UavSection:
    height: float = _q(100.0, "length")
    cpu: float = _q(1e9, "frequency")
    cycles_per_bit: float = _q(20.0)
    bandwidth: float = _q(2e6, "frequency")
    tx_power: float = _q(0.032, "power")
    rx_power: float = _q(0.032, "power", positive=False)


@dataclass(frozen=True)
class BsSection:
    height: float = _q(20.0, "length", positive=False)
    cpu: float = _q(20e9, "frequency")
    workers: int | tuple[int, ...] = 15
    service_cost: float | tuple[float, ...] = 0.2


@dataclass(frozen=True)
class RadioSection:
    noise_power: float = _q(1e-13, "power")
    reference_gain: float = _q(1e-6, "ratio")


@dataclass(frozen=True)
class CostSection:
    alpha1: float = _q(0.6, positive=False)
    alpha2: float = _q(0.0004, positive=False)


@dataclass(frozen=True)
class NetworkSection:
    uav_count: int = 10
    bs_count: int = 2
    field_size: float = _q(1000.0, "length")
    grid_cell: float = _q(25.0, "length")
    topology_seed: int = 7
    uav_positions: tuple[tuple[float, float], ...] | None = None
    bs_positions: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class SolverSection:
    mode: str = "sip"
    oracle_cap: int = 10**7
    scale: int = 10**9
    evf_rounding: str = "half_up"
    clamp_shortfall: bool = False
    tie_break: str = "lexicographic"


@dataclass(frozen=True)
class ScenarioSection:
    file: str | None = None
    failure_prob: float = _q(0.2, positive=False)
    shortfall: int = 1
    shortfall_dist: dict | None = None
    shortfall_mode: str = "mode"
    max_scenarios: int = DEFAULT_SCENARIO_CAP
    seed: int = 0


@dataclass(frozen=True)
class ExperimentSection:
    seed: int = 0
    cost_structure_offload_max: int = 12
    cost_structure_workers: int = 100
    prohibitive_local_cost: float = _q(1e6)
    scalability_max_uavs: int = 10
    kink_factor: float = _q(3.0)
    evf_workers: int = 100
    evf_price_min: float = _q(0.0, positive=False)
    evf_price_max: float = _q(2.0)
    evf_points: int = 20
    mc_trials: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    coding: CodingSection = field(default_factory=CodingSection)
    rotorcraft: RotorcraftSection = field(default_factory=RotorcraftSection)
    uav: UavSection = field(default_factory=UavSection)
    bs: BsSection = field(default_factory=BsSection)
    radio: RadioSection = field(default_factory=RadioSection)
    costs: CostSection = field(default_factory=CostSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    solver: SolverSection = field(default_factory=SolverSection)
    scenarios: ScenarioSection = field(default_factory=ScenarioSection)
    experiments: ExperimentSection = field(default_factory=ExperimentSection)
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        # the output location does not change any result
        content = {k: v for k, v in self.to_dict().items() if k != "output_dir"}
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, section: str | None = None, **changes) -> "RunConfig":
        if section is None:
            return dataclasses.replace(self, **changes)
        sec = dataclasses.replace(getattr(self, section), **changes)
        return dataclasses.replace(self, **{section: sec})


_SECTIONS = {f.name: f for f in fields(RunConfig) if f.name != "output_dir"}


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _coerce(section: str, f: dataclasses.Field, value: Any) -> Any:
    path = f"{section}.{f.name}"
    dim = f.metadata.get("dimension")
    positive = f.metadata.get("positive")
    if "dimension" in f.metadata:
        out = parse_quantity(value, dim, path)
        if not math.isfinite(out) or (out <= 0 if positive else out < 0):
            raise ConfigError(path, f"must be {'> 0' if positive else '>= 0'}, got {value!r}")
        return out
    default = f.default
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(value, (list, tuple)):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if f.name == "shortfall_dist" and value is not None:
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a table of shortfall -> probability")
        try:
            return {int(a): float(p) for a, p in value.items()}
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return _tuplify(value)


def _check(cfg: RunConfig) -> None:
    def bad(path, msg):
        raise ConfigError(path, msg)

    if cfg.coding.N < 0:
        bad("coding.N", "must be >= 0")
    if cfg.coding.m < 1:
        bad("coding.m", "must be >= 1")
    if (cfg.coding.s is None) != (cfg.coding.t is None):
        bad("coding.s", "give both s and t, or neither")
    if cfg.coding.split_mode not in ("stationary", "minimize_k"):
        bad("coding.split_mode", "must be 'stationary' or 'minimize_k'")
    if cfg.network.uav_count < 1:
        bad("network.uav_count", "must be >= 1")
    if cfg.network.bs_count < 1:
        bad("network.bs_count", "must be >= 1")
    for name in ("workers", "service_cost"):
        v = getattr(cfg.bs, name)
        values = v if isinstance(v, tuple) else (v,)
        if isinstance(v, tuple) and len(v) != cfg.network.bs_count:
            bad(f"bs.{name}", f"needs {cfg.network.bs_count} entries")
        if any(not isinstance(x, (int, float)) or isinstance(x, bool) or x < 0 for x in values):
            bad(f"bs.{name}", "entries must be nonnegative numbers")
        if name == "workers" and any(x < 1 or x != int(x) for x in values):
            bad("bs.workers", "entries must be integers >= 1")
    for name, count in (("uav_positions", cfg.network.uav_count), ("bs_positions", cfg.network.bs_count)):
        pos = getattr(cfg.network, name)
        if pos is not None and (len(pos) != count or any(len(p) != 2 for p in pos)):
            bad(f"network.{name}", f"needs {count} [x, y] pairs")
    if cfg.solver.mode not in ("dip", "sip", "evf", "oracle"):
        bad("solver.mode", "must be one of dip, sip, evf, oracle")
    if cfg.solver.evf_rounding not in ("half_up", "ceil"):
        bad("solver.evf_rounding", "must be 'half_up' or 'ceil'")
    if cfg.solver.tie_break != "lexicographic":
        bad("solver.tie_break", "only 'lexicographic' is supported")
    if cfg.solver.scale < 1:
        bad("solver.scale", "must be >= 1")
    if not 0 <= cfg.scenarios.failure_prob <= 1:
        bad("scenarios.failure_prob", "must lie in [0, 1]")
    if cfg.scenarios.shortfall < 1:
        bad("scenarios.shortfall", "must be >= 1")
    if cfg.scenarios.shortfall_mode not in ("mode", "sample", "expand"):
        bad("scenarios.shortfall_mode", "must be 'mode', 'sample' or 'expand'")
    if cfg.experiments.evf_points < 1:
        bad("experiments.evf_points", "must be >= 1")
    if cfg.experiments.mc_trials < 1:
        bad("experiments.mc_trials", "must be >= 1")


_GENERATOR_KEYS = {"failure_prob", "shortfall", "shortfall_dist", "shortfall_mode", "seed"}


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "configuration must be a table")
    sections = {}
    for key, value in data.items():
        if key == "output_dir":
            if not isinstance(value, str):
                raise ConfigError("output_dir", "expected a string")
            continue
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown section")
        if not isinstance(value, dict):
            raise ConfigError(key, "expected a table")
        cls = _SECTIONS[key].default_factory
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for name, raw in value.items():
            if name not in known:
                raise ConfigError(f"{key}.{name}", "unknown key")
            kwargs[name] = _coerce(key, known[name], raw)
        if key == "scenarios" and value.get("file") is not None and _GENERATOR_KEYS & set(value):
            raise ConfigError("scenarios", "give either a scenario file or generator parameters, not both")
        sections[key] = cls(**kwargs)
    cfg = RunConfig(**sections, output_dir=data.get("output_dir", "out"))
    _check(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return config_from_dict({})
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML: {exc}") from None
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    return config_from_dict(data)


# -- building domain objects ---------------------------------------------------------

def coding_params(cfg: RunConfig) -> CodingParams:
    c = cfg.coding
    if c.s is not None:
        params = CodingParams.from_split(c.N, c.s, c.t)
        if params.m != c.m:
            raise ConfigError("coding.m", f"s*t = {params.m} disagrees with m = {c.m}")
        return params
    return select_split(c.m, N=c.N, mode=c.split_mode)


def rotorcraft(cfg: RunConfig) -> RotorcraftParams:
    r = cfg.rotorcraft
    weight = r.weight if r.weight_is_force else r.weight * r.gravity
    return RotorcraftParams(
        weight_force=weight,
        air_density=r.air_density,
        rotor_radius=r.rotor_radius,
        disc_area=r.disc_area,
        blade_angular_velocity=r.blade_angular_velocity,
        tip_speed=r.tip_speed,
        rotor_solidity=r.rotor_solidity,
        fuselage_drag_ratio=r.fuselage_drag_ratio,
        induced_velocity_hover=r.induced_velocity_hover,
        profile_drag_coeff=r.profile_drag_coeff,
        induced_power_factor=r.induced_power_factor,
    )


def _per_bs(value, count):
    return tuple(value) if isinstance(value, tuple) else (value,) * count


def build_instance(cfg: RunConfig) -> NetworkInstance:
    from .experiments import generate_topology

    net = cfg.network
    topo = generate_topology(net.uav_count, net.bs_count, net.field_size, net.grid_cell, net.topology_seed)
    uav_xy = net.uav_positions if net.uav_positions is not None else topo.uav_positions
    bs_xy = net.bs_positions if net.bs_positions is not None else topo.bs_positions
    rc = rotorcraft(cfg)
    uavs = tuple(
        UavSpec(
            position=(float(x), float(y), cfg.uav.height),
            cpu_hz=cfg.uav.cpu,
            cycles_per_bit=cfg.uav.cycles_per_bit,
            bandwidth=cfg.uav.bandwidth,
            tx_power=cfg.uav.tx_power,
            rx_power=cfg.uav.rx_power,
            rotorcraft=rc,
        )
        for x, y in uav_xy
    )
    workers = _per_bs(cfg.bs.workers, net.bs_count)
    prices = _per_bs(cfg.bs.service_cost, net.bs_count)
    bss = tuple(
        BsSpec(position=(float(x), float(y), cfg.bs.height), cpu_hz=cfg.bs.cpu, workers=int(n), service_cost=float(c))
        for (x, y), n, c in zip(bs_xy, workers, prices)
    )
    try:
        return NetworkInstance(
            uavs=uavs,
            bss=bss,
            coding=coding_params(cfg),
            radio=RadioConstants(cfg.radio.noise_power, cfg.radio.reference_gain),
            coefficients=CostCoefficients(cfg.costs.alpha1, cfg.costs.alpha2),
            bits_per_symbol=cfg.coding.bits_per_symbol,
        )
    except ValidationError as exc:
        raise ConfigError("", str(exc)) from None


def build_scenarios(cfg: RunConfig, uav_count: int, k: int) -> ScenarioSet:
    sc = cfg.scenarios
    if sc.file is not None:
        scen = read_scenarios(sc.file)
    else:
        dist = sc.shortfall_dist if sc.shortfall_dist is not None else {sc.shortfall: 1.0}
        scen = generate_independent(
            uav_count, sc.failure_prob, dist, mode=sc.shortfall_mode, seed=sc.seed, cap=sc.max_scenarios
        )
    return validate(scen, k)
