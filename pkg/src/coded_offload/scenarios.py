"""Shortfall scenarios: which UAVs lose offloaded copies, and how many."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionError,
    InconsistentDistributionError,
    InvalidShortfallError,
    MalformedScenarioError,
    ScenarioExplosionError,
    ValidationError,
)

PROBABILITY_TOL = 1e-9
DEFAULT_SCENARIO_CAP = 2**20


@dataclass(frozen=True)
class Scenario:
    flags: tuple[int, ...]
    shortfalls: tuple[int, ...]
    probability: float

    def __post_init__(self):
        object.__setattr__(self, "flags", tuple(int(f) for f in self.flags))
        object.__setattr__(self, "shortfalls", tuple(int(a) for a in self.shortfalls))
        object.__setattr__(self, "probability", float(self.probability))

    @property
    def effective_shortfall(self) -> tuple[int, ...]:
        """Elementwise ``F_y * A_y``."""
        return tuple(f * a for f, a in zip(self.flags, self.shortfalls))


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    uav_count: int

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    @property
    def max_shortfall(self) -> int:
        return max((max(s.effective_shortfall, default=0) for s in self.scenarios), default=0)

    @classmethod
    def no_failure(cls, uav_count: int) -> "ScenarioSet":
        zeros = (0,) * uav_count
        return cls((Scenario(zeros, zeros, 1.0),), uav_count)


def validate(scenarios: ScenarioSet, k: int) -> ScenarioSet:
    """Check every invariant and return a copy with probabilities summing to 1."""
    if len(scenarios) == 0:
        raise MalformedScenarioError("scenario set is empty")
    Y = scenarios.uav_count
    for i, s in enumerate(scenarios):
        if len(s.flags) != Y or len(s.shortfalls) != Y:
            raise DimensionError(f"scenario {i}: expected vectors of length {Y}")
        if not (s.probability >= 0 and math.isfinite(s.probability)):
            raise InconsistentDistributionError(f"scenario {i}: probability {s.probability} is not >= 0")
        for y, (f, a) in enumerate(zip(s.flags, s.shortfalls)):
            if f not in (0, 1):
                raise MalformedScenarioError(f"scenario {i}, UAV {y}: flag must be 0 or 1, got {f}")
            if f == 0 and a != 0:
                raise MalformedScenarioError(f"scenario {i}, UAV {y}: shortfall {a} without a failure flag")
            if f == 1 and a < 1:
                raise MalformedScenarioError(f"scenario {i}, UAV {y}: failure flag with shortfall {a} < 1")
            if a > k:
                raise InvalidShortfallError(f"scenario {i}, UAV {y}: shortfall {a} exceeds threshold k={k}")

    total = math.fsum(s.probability for s in scenarios)
    if abs(total - 1.0) > PROBABILITY_TOL:
        raise InconsistentDistributionError(f"probabilities sum to {total!r}, not 1")

    probs = normalise([s.probability for s in scenarios])
    return ScenarioSet(
        tuple(Scenario(s.flags, s.shortfalls, p) for s, p in zip(scenarios, probs)), Y
    )


def normalise(probs: Sequence[float]) -> list[float]:
    """Scale to sum 1, then fold the float residual into the largest entry so
    that ``math.fsum`` of the result is exactly 1.0 (making this idempotent)."""
    total = math.fsum(probs)
    if total == 1.0:
        return list(probs)
    out = [p / total for p in probs]
    big = max(range(len(out)), key=out.__getitem__)
    for _ in range(8):
        residual = 1.0 - math.fsum(out)
        if residual == 0.0:
            break
        out[big] += residual
    return out


def _normalise_dist(dist: Mapping[int, float] | None) -> dict[int, float]:
    if dist is None:
        return {1: 1.0}
    dist = {int(a): float(p) for a, p in dist.items() if float(p) > 0}
    if not dist or any(a < 1 for a in dist):
        raise ValidationError(f"shortfall distribution needs positive support >= 1: {dist}")
    if abs(math.fsum(dist.values()) - 1.0) > PROBABILITY_TOL:
        raise InconsistentDistributionError(f"shortfall distribution sums to {math.fsum(dist.values())}")
    return dict(sorted(dist.items()))


def generate_independent(
    Y: int,
    fail_prob: float | Sequence[float],
    shortfall_dist: Mapping[int, float] | None = None,
    *,
    mode: str = "mode",
    seed: int | None = None,
    cap: int = DEFAULT_SCENARIO_CAP,
) -> ScenarioSet:
    """Enumerate independent per-UAV failures.

    Flags are enumerated in binary counting order (UAV 0 is the most
    significant bit); zero-probability vectors are dropped.  A failed UAV's
    shortfall is the mode of ``shortfall_dist`` (``mode="mode"``), a seeded
    draw from it (``mode="sample"``), or every value in its support with the
    corresponding probability (``mode="expand"``).
    """
    if Y < 1:
        raise ValidationError("need at least one UAV")
    q = [float(fail_prob)] * Y if np.isscalar(fail_prob) else [float(v) for v in fail_prob]
    if len(q) != Y:
        raise DimensionError(f"{len(q)} failure probabilities for {Y} UAVs")
    if any(not 0 <= v <= 1 for v in q):
        raise ValidationError(f"failure probabilities must lie in [0, 1]: {q}")
    dist = _normalise_dist(shortfall_dist)
    if mode not in ("mode", "sample", "expand"):
        raise ValidationError(f"unknown shortfall mode {mode!r}")

    # only UAVs with 0 < q < 1 actually branch
    branching = sum(1 for v in q if 0 < v < 1)
    count = 2**branching
    if mode == "expand":
        count = (1 + len(dist)) ** branching
    if count > cap:
        raise ScenarioExplosionError(f"{count} scenarios exceed the cap of {cap}")

    modal = max(dist.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    rng = np.random.default_rng(seed) if mode == "sample" else None
    support = list(dist)
    weights = np.array(list(dist.values()))

    out = []
    choices = [(0,) if v == 0 else (1,) if v == 1 else (0, 1) for v in q]
    for flags in itertools.product(*choices):
        p = math.prod(v if f else 1 - v for f, v in zip(flags, q))
        if p == 0:
            continue
        failed = [y for y in range(Y) if flags[y]]
        if mode == "expand":
            for values in itertools.product(support, repeat=len(failed)):
                a = [0] * Y
                pa = p
                for y, v in zip(failed, values):
                    a[y] = v
                    pa *= dist[v]
                out.append(Scenario(flags, tuple(a), pa))
            continue
        a = [0] * Y
        for y in failed:
            a[y] = modal if rng is None else int(support[rng.choice(len(support), p=weights / weights.sum())])
        out.append(Scenario(flags, tuple(a), p))

    probs = normalise([s.probability for s in out])
    return ScenarioSet(tuple(Scenario(s.flags, s.shortfalls, p) for s, p in zip(out, probs)), Y)


def expected_shortfall(scenarios: ScenarioSet) -> np.ndarray:
    """Per-UAV ``E[F_y * A_y]``."""
    if len(scenarios) == 0:
        return np.zeros(scenarios.uav_count)
    fa = np.array([s.effective_shortfall for s in scenarios], dtype=float)
    return scenarios.probabilities @ fa


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_indices(scenarios: ScenarioSet, n: int, seed) -> np.ndarray:
    p = scenarios.probabilities
    return _rng(seed).choice(len(p), size=n, p=p / p.sum())


def sample(scenarios: ScenarioSet, seed) -> Scenario:
    """Draw one scenario with probability proportional to ``p``."""
    if len(scenarios) == 1:
        return scenarios.scenarios[0]
    return scenarios.scenarios[int(sample_indices(scenarios, 1, seed)[0])]


# -- file format -------------------------------------------------------------------

def header(Y: int) -> list[str]:
    return ["p", *(f"F_{y + 1}" for y in range(Y)), *(f"A_{y + 1}" for y in range(Y))]


def _data_lines(lines: Iterable[str]):
    for line in lines:
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            yield stripped


def parse_scenarios(text: str) -> ScenarioSet:
    rows = list(csv.reader(_data_lines(io.StringIO(text)), skipinitialspace=True))
    if not rows:
        raise MalformedScenarioError("scenario file has no header")
    head = [h.strip() for h in rows[0]]
    if not head or head[0] != "p" or (len(head) - 1) % 2:
        raise MalformedScenarioError(f"header must be 'p, F_1..F_Y, A_1..A_Y', got {head}")
    Y = (len(head) - 1) // 2
    if head != header(Y):
        raise MalformedScenarioError(f"header must be {', '.join(header(Y))}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(head):
            raise MalformedScenarioError(f"row {lineno}: expected {len(head)} fields, got {len(row)}")
        try:
            p = float(row[0])
            ints = [int(v) for v in row[1:]]
        except ValueError as exc:
            raise MalformedScenarioError(f"row {lineno}: {exc}") from None
        out.append(Scenario(tuple(ints[:Y]), tuple(ints[Y:]), p))
    return ScenarioSet(tuple(out), Y)


def read_scenarios(path: str | Path) -> ScenarioSet:
    return parse_scenarios(Path(path).read_text())


def format_scenarios(scenarios: ScenarioSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header(scenarios.uav_count))
    for s in scenarios:
        writer.writerow([repr(s.probability), *s.flags, *s.shortfalls])
    return buf.getvalue()


def write_scenarios(scenarios: ScenarioSet, path: str | Path) -> None:
    Path(path).write_text(format_scenarios(scenarios))
