"""Physical-layer model: rotorcraft power, compute and link timing, costs.

All quantities are linear-scale SI (W, s, Hz, J).  ``bits_per_symbol`` maps
symbol counts to bits; 64 means one double-precision real per matrix entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .coding import CodingParams, decode_symbols
from .errors import DegenerateGeometryError, UnreachableError, ValidationError

DEFAULT_BITS_PER_SYMBOL = 64
GRAVITY = 9.8


def _require_positive(obj, *names):
    for name in names:
        value = getattr(obj, name)
        if not value > 0:
            raise ValidationError(f"{type(obj).__name__}.{name} must be > 0, got {value}")


@dataclass(frozen=True)
class RotorcraftParams:
    weight_force: float  # N
    air_density: float
    rotor_radius: float
    disc_area: float
    blade_angular_velocity: float
    tip_speed: float
    rotor_solidity: float
    fuselage_drag_ratio: float
    induced_velocity_hover: float
    profile_drag_coeff: float
    induced_power_factor: float

    def __post_init__(self):
        _require_positive(self, *self.__dataclass_fields__)

    @property
    def blade_profile_power(self) -> float:
        """P0 = delta/8 * rho * s * A * Omega^3 * R^3."""
        return (
            self.profile_drag_coeff / 8
            * self.air_density * self.rotor_solidity * self.disc_area
            * self.blade_angular_velocity**3 * self.rotor_radius**3
        )

    @property
    def induced_power(self) -> float:
        """P1 = (1 + k) W^1.5 / sqrt(2 rho A)."""
        return (
            (1 + self.induced_power_factor) * self.weight_force**1.5
            / math.sqrt(2 * self.disc_area * self.air_density)
        )


@dataclass(frozen=True)
class UavSpec:
    position: tuple[float, float, float]
    cpu_hz: float
    cycles_per_bit: float
    bandwidth: float
    tx_power: float
    rx_power: float
    rotorcraft: RotorcraftParams

    def __post_init__(self):
        _require_positive(self, "cpu_hz", "cycles_per_bit", "bandwidth", "tx_power")
        if self.rx_power < 0:
            raise ValidationError(f"UavSpec.rx_power must be >= 0, got {self.rx_power}")
        if not self.position[2] > 0:
            raise ValidationError(f"UAV height must be > 0, got {self.position[2]}")


@dataclass(frozen=True)
class BsSpec:
    position: tuple[float, float, float]
    cpu_hz: float
    workers: int
    service_cost: float

    def __post_init__(self):
        _require_positive(self, "cpu_hz")
        if self.workers < 1:
            raise ValidationError(f"BsSpec.workers must be >= 1, got {self.workers}")
        if self.position[2] < 0:
            raise ValidationError(f"BS height must be >= 0, got {self.position[2]}")
        if self.service_cost < 0:
            raise ValidationError(f"BsSpec.service_cost must be >= 0, got {self.service_cost}")

    @property
    def worker_cpu_hz(self) -> float:
        return self.cpu_hz / self.workers


@dataclass(frozen=True)
class RadioConstants:
    noise_power: float  # W
    reference_gain: float  # linear, at 1 m

    def __post_init__(self):
        _require_positive(self, "noise_power", "reference_gain")


@dataclass(frozen=True)
class CostCoefficients:
    alpha1: float  # per second
    alpha2: float  # per joule

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValidationError("cost coefficients must be nonnegative")


@dataclass(frozen=True)
class CostRates:
    """Per-UAV prices; ``offload_cost[f]`` is the price per copy sent to BS ``f``."""

    local_cost: float
    offload_cost: tuple[float, ...]
    decode_cost: float
    correction_cost: float

    def __post_init__(self):
        object.__setattr__(self, "offload_cost", tuple(float(c) for c in self.offload_cost))
        values = (self.local_cost, self.decode_cost, self.correction_cost, *self.offload_cost)
        if any(not (v >= 0 and math.isfinite(v)) for v in values):
            raise ValidationError(f"cost rates must be finite and nonnegative: {self}")


# -- power ---------------------------------------------------------------------

def propulsion_power(V: float, r: RotorcraftParams) -> float:
    if V < 0:
        raise ValueError("speed must be nonnegative")
    p0, p1 = r.blade_profile_power, r.induced_power
    v0 = r.induced_velocity_hover
    profile = p0 * (1 + 3 * V**2 / r.tip_speed**2)
    induced = p1 * (math.sqrt(1 + V**4 / (4 * v0**4)) - V**2 / (2 * v0**2)) ** 0.5
    parasite = 0.5 * r.fuselage_drag_ratio * r.air_density * r.disc_area * V**3
    return profile + induced + parasite


def hover_power(r: RotorcraftParams) -> float:
    return propulsion_power(0.0, r)


# -- computation -----------------------------------------------------------------

def local_compute_time(u: UavSpec, c: CodingParams, bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL) -> float:
    """Seconds for the UAV to compute one copy."""
    symbols = float(c.N) ** 3 / (c.m * c.t)
    return u.cycles_per_bit * bits_per_symbol * symbols / u.cpu_hz


def encode_time(u: UavSpec, c: CodingParams, bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL) -> float:
    """Seconds to encode one copy."""
    return u.cycles_per_bit * bits_per_symbol * float(c.N) ** 2 / u.cpu_hz


def decode_time(u: UavSpec, c: CodingParams, bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL) -> float:
    """Seconds to decode once k copies are back."""
    return u.cycles_per_bit * bits_per_symbol * decode_symbols(c) / u.cpu_hz


def threshold_time(u: UavSpec, c: CodingParams, bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL) -> float:
    """Worst-case hover wait: the UAV computing and encoding all k copies itself."""
    return c.k * (local_compute_time(u, c, bits_per_symbol) + encode_time(u, c, bits_per_symbol))


# -- link ------------------------------------------------------------------------

def squared_distance(a, b) -> float:
    return sum((ai - bi) ** 2 for ai, bi in zip(a, b))


def channel_gain(uav_pos, bs_pos, radio: RadioConstants) -> float:
    d2 = squared_distance(uav_pos, bs_pos)
    if d2 == 0:
        raise DegenerateGeometryError(f"UAV and BS coincide at {tuple(uav_pos)}")
    return radio.reference_gain / d2


def transmission_rate(u: UavSpec, gain: float, radio: RadioConstants) -> float:
    if gain < 0:
        raise ValueError("channel gain must be nonnegative")
    return u.bandwidth * math.log2(1 + u.tx_power * gain / radio.noise_power)


def link_rate(u: UavSpec, bs: BsSpec, radio: RadioConstants) -> float:
    return transmission_rate(u, channel_gain(u.position, bs.position, radio), radio)


def downlink_rate(u: UavSpec, bs: BsSpec, radio: RadioConstants) -> float:
    # BS-to-UAV rate taken as the reciprocal of the uplink (same B, P, h, N0)
    return link_rate(u, bs, radio)


def offload_time(
    u: UavSpec, bs: BsSpec, c: CodingParams, radio: RadioConstants,
    bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL,
) -> float:
    """Seconds to send one copy (``N^2/m`` symbols) to ``bs``."""
    rate = link_rate(u, bs, radio)
    if rate <= 0:
        raise UnreachableError(f"zero uplink rate from UAV at {u.position} to BS at {bs.position}")
    return bits_per_symbol * float(c.N) ** 2 / c.m / rate


def receive_energy(
    u: UavSpec, bs: BsSpec, c: CodingParams, radio: RadioConstants,
    bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL,
) -> float:
    """Joules spent receiving one computed copy (``N^2/t^2`` symbols)."""
    rate = downlink_rate(u, bs, radio)
    if rate <= 0:
        raise UnreachableError(f"zero downlink rate from BS at {bs.position} to UAV at {u.position}")
    return u.rx_power * bits_per_symbol * float(c.N) ** 2 / c.t**2 / rate


# -- prices ----------------------------------------------------------------------

def cost_rates(
    u: UavSpec,
    bss: list[BsSpec],
    c: CodingParams,
    coeff: CostCoefficients,
    radio: RadioConstants,
    bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL,
) -> CostRates:
    t_local = local_compute_time(u, c, bits_per_symbol)
    t_enc = encode_time(u, c, bits_per_symbol)
    local = coeff.alpha1 * (t_local + t_enc)
    offload = tuple(
        coeff.alpha1 * (offload_time(u, bs, c, radio, bits_per_symbol) + t_enc)
        + coeff.alpha2 * receive_energy(u, bs, c, radio, bits_per_symbol)
        + bs.service_cost
        for bs in bss
    )
    decode = coeff.alpha1 * decode_time(u, c, bits_per_symbol)
    correction = local + coeff.alpha2 * hover_power(u.rotorcraft) * t_local
    return CostRates(local_cost=local, offload_cost=offload, decode_cost=decode, correction_cost=correction)


@dataclass(frozen=True)
class NetworkInstance:
    """Everything the planner needs to price and solve one network."""

    uavs: tuple[UavSpec, ...]
    bss: tuple[BsSpec, ...]
    coding: CodingParams
    radio: RadioConstants
    coefficients: CostCoefficients
    bits_per_symbol: float = DEFAULT_BITS_PER_SYMBOL
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "uavs", tuple(self.uavs))
        object.__setattr__(self, "bss", tuple(self.bss))
        if not self.bss:
            raise ValidationError("instance needs at least one base station")
        if not self.bits_per_symbol > 0:
            raise ValidationError("bits_per_symbol must be > 0")

    @property
    def k(self) -> int:
        return self.coding.k

    @property
    def capacities(self) -> tuple[int, ...]:
        return tuple(bs.workers for bs in self.bss)

    @property
    def uav_count(self) -> int:
        return len(self.uavs)

    def rates(self) -> list[CostRates]:
        return [
            cost_rates(u, list(self.bss), self.coding, self.coefficients, self.radio, self.bits_per_symbol)
            for u in self.uavs
        ]

    def subset(self, n_uavs: int) -> "NetworkInstance":
        return NetworkInstance(
            self.uavs[:n_uavs], self.bss, self.coding, self.radio, self.coefficients,
            self.bits_per_symbol, dict(self.meta),
        )

    def with_capacities(self, capacities) -> "NetworkInstance":
        bss = tuple(
            BsSpec(bs.position, bs.cpu_hz, int(n), bs.service_cost) for bs, n in zip(self.bss, capacities)
        )
        return NetworkInstance(
            self.uavs, bss, self.coding, self.radio, self.coefficients, self.bits_per_symbol, dict(self.meta)
        )
