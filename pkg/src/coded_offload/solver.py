"""Exact allocation of coded copies: deterministic, two-stage stochastic, EVF.

The second stage is solved in closed form (recompute exactly the missing
copies), which leaves a pure first-stage integer search.  Per UAV the
first-stage cost depends only on its own local/offload counts; UAVs are
coupled solely through the worker capacity of each base station.  The search
is a depth-first branch and bound over UAVs with

* a capacity-relaxed lower bound (sum of each remaining UAV's own minimum),
* dominance pruning on the capacity already consumed at a given depth.

Costs are compared as integers in units of ``1 / scale`` currency so that
optimality and tie-breaking never depend on float rounding.  Among optimal
allocations the reported one is the lexicographic minimum of
``(total offload, offload matrix row by row, local vector)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .energy import CostRates, NetworkInstance
from .errors import ConstraintViolationError, DimensionError, OracleTooLargeError, ValidationError
from .scenarios import Scenario, ScenarioSet, expected_shortfall

DEFAULT_SCALE = 10**9
DEFAULT_ORACLE_CAP = 10**7


@dataclass(frozen=True)
class Allocation:
    local: tuple[int, ...]
    offload: tuple[tuple[int, ...], ...]
    # recourse[y][w]: copies UAV y recomputes in scenario w
    recourse: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "local", tuple(int(v) for v in self.local))
        object.__setattr__(self, "offload", tuple(tuple(int(v) for v in row) for row in self.offload))
        object.__setattr__(self, "recourse", tuple(tuple(int(v) for v in row) for row in self.recourse))

    def first_stage(self) -> "Allocation":
        return Allocation(self.local, self.offload)

    @property
    def offload_totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.offload)

    @property
    def totals(self) -> tuple[int, ...]:
        return tuple(l + o for l, o in zip(self.local, self.offload_totals))

    @property
    def bs_load(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.offload)) if self.offload else ()

    def sort_key(self) -> tuple:
        flat = tuple(v for row in self.offload for v in row)
        return (sum(flat), flat, self.local)


@dataclass(frozen=True)
class UavBreakdown:
    uav: int
    local: int
    offload: tuple[int, ...]
    stage1_cost: float
    expected_recourse_cost: float


@dataclass(frozen=True)
class SolveReport:
    allocation: Allocation
    stage1_cost: float
    expected_recourse_cost: float
    total_cost: float
    per_uav: tuple[UavBreakdown, ...]
    nodes_explored: int
    method: str
    objective_fixed: int
    scale: int = DEFAULT_SCALE
    diagnostics: dict = field(default_factory=dict, compare=False)


def recourse_copies(
    first_stage_totals: Sequence[int],
    scenario: Scenario,
    k: int,
    offloaded: Sequence[int] | None = None,
    clamp: bool = False,
) -> tuple[int, ...]:
    """Cheapest second-stage recomputation for each UAV in ``scenario``.

    ``max(0, k + A_y - total_y)`` for failed UAVs, else 0.  With ``clamp`` the
    shortfall cannot exceed the number of copies the UAV actually offloaded.
    """
    out = []
    for y, (total, f, a) in enumerate(zip(first_stage_totals, scenario.flags, scenario.shortfalls)):
        if not f:
            out.append(0)
            continue
        if clamp:
            a = min(a, offloaded[y])
        out.append(max(0, k + a - total))
    return tuple(out)


def to_fixed(value: float, scale: int = DEFAULT_SCALE) -> int:
    return int(round(value * scale))


def _check_dimensions(instance: NetworkInstance, rates: Sequence[CostRates], scenarios: ScenarioSet | None):
    Y, F = instance.uav_count, len(instance.bss)
    if len(rates) != Y:
        raise DimensionError(f"{len(rates)} rate records for {Y} UAVs")
    for y, r in enumerate(rates):
        if len(r.offload_cost) != F:
            raise DimensionError(f"UAV {y}: {len(r.offload_cost)} offload prices for {F} base stations")
    if scenarios is not None and scenarios.uav_count != Y:
        raise DimensionError(f"scenario set describes {scenarios.uav_count} UAVs, instance has {Y}")


def exact_probabilities(scenarios: ScenarioSet) -> list[Fraction]:
    raw = [Fraction(s.probability) for s in scenarios]
    total = sum(raw)
    return [p / total for p in raw]


class FixedPointCosts:
    """Integer-valued cost model shared by every exact search."""

    def __init__(
        self,
        rates: Sequence[CostRates],
        scenarios: ScenarioSet | None,
        k: int,
        clamp: bool = False,
        scale: int = DEFAULT_SCALE,
    ):
        self.k = k
        self.clamp = clamp
        self.scale = scale
        self.local = [to_fixed(r.local_cost, scale) for r in rates]
        self.offload = [[to_fixed(c, scale) for c in r.offload_cost] for r in rates]
        self.decode = [to_fixed(r.decode_cost, scale) for r in rates]
        self.correction = [to_fixed(r.correction_cost, scale) for r in rates]
        Y = len(rates)
        # failure mass per UAV keyed by shortfall size
        self.fail_mass: list[dict[int, Fraction]] = [dict() for _ in range(Y)]
        if scenarios is not None:
            for s, p in zip(scenarios, exact_probabilities(scenarios)):
                for y in range(Y):
                    if s.flags[y] and p:
                        a = s.shortfalls[y]
                        self.fail_mass[y][a] = self.fail_mass[y].get(a, Fraction(0)) + p
        self.max_shortfall = [max(m, default=0) for m in self.fail_mass]
        self._recourse = lru_cache(maxsize=None)(self._expected_recourse)

    def stage1(self, y: int, local: int, offload: Sequence[int]) -> int:
        return local * self.local[y] + self.decode[y] + sum(o * c for o, c in zip(offload, self.offload[y]))

    def _expected_recourse(self, y: int, total: int, offloaded: int) -> int:
        copies = Fraction(0)
        for a, p in self.fail_mass[y].items():
            if self.clamp:
                a = min(a, offloaded)
            copies += p * max(0, self.k + a - total)
        return round(copies * self.correction[y])

    def recourse(self, y: int, total: int, offloaded: int) -> int:
        if not self.clamp:
            offloaded = 0
        return self._recourse(y, total, offloaded)

    def uav_cost(self, y: int, local: int, offload: Sequence[int], stochastic: bool = True) -> int:
        cost = self.stage1(y, local, offload)
        if stochastic:
            off = sum(offload)
            cost += self.recourse(y, local + off, off)
        return cost


# -- evaluation ----------------------------------------------------------------------

def evaluate_total_cost(
    alloc: Allocation,
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet | None,
    *,
    clamp: bool = False,
    method: str = "EVAL",
    nodes_explored: int = 0,
    scale: int = DEFAULT_SCALE,
    diagnostics: dict | None = None,
) -> SolveReport:
    """Score a first-stage allocation against a scenario set.

    Recourse copies are taken from ``alloc.recourse`` when supplied (and then
    checked for feasibility), otherwise filled in with the closed form.
    Passing ``scenarios=None`` scores the first stage alone.
    """
    _check_dimensions(instance, rates, scenarios)
    Y, F, k = instance.uav_count, len(instance.bss), instance.k
    if len(alloc.local) != Y or len(alloc.offload) != Y or any(len(r) != F for r in alloc.offload):
        raise DimensionError(f"allocation shape does not match {Y} UAVs x {F} base stations")
    if any(v < 0 for v in alloc.local) or any(v < 0 for row in alloc.offload for v in row):
        raise ConstraintViolationError("nonnegativity", "copy counts must be >= 0")
    totals = alloc.totals
    offl = alloc.offload_totals
    for y, total in enumerate(totals):
        if total < k:
            raise ConstraintViolationError("first-stage threshold", f"UAV {y} has {total} copies < k={k}")
    for f, (load, cap) in enumerate(zip(alloc.bs_load, instance.capacities)):
        if load > cap:
            raise ConstraintViolationError("worker capacity", f"BS {f} receives {load} copies > {cap} workers")

    scen = scenarios.scenarios if scenarios is not None else ()
    closed = [recourse_copies(totals, s, k, offl, clamp) for s in scen]
    if alloc.recourse:
        if len(alloc.recourse) != Y or any(len(row) != len(scen) for row in alloc.recourse):
            raise DimensionError("recourse matrix must be UAVs x scenarios")
        for w, s in enumerate(scen):
            for y in range(Y):
                a = min(s.shortfalls[y], offl[y]) if clamp else s.shortfalls[y]
                m_l = alloc.recourse[y][w]
                if m_l < 0 or (s.flags[y] and totals[y] + m_l - a < k):
                    raise ConstraintViolationError(
                        "second-stage threshold", f"UAV {y}, scenario {w}: {totals[y]} + {m_l} - {a} < k={k}"
                    )
        recourse = alloc.recourse
    else:
        recourse = tuple(tuple(closed[w][y] for w in range(len(scen))) for y in range(Y))

    model = FixedPointCosts(rates, scenarios, k, clamp, scale)
    exact = exact_probabilities(scenarios) if scenarios is not None else []
    per_uav = []
    fixed_total = 0
    for y, r in enumerate(rates):
        s1 = math.fsum([alloc.local[y] * r.local_cost, r.decode_cost,
                        *(o * c for o, c in zip(alloc.offload[y], r.offload_cost))])
        rec = math.fsum(
            s.flags[y] * s.probability * recourse[y][w] * r.correction_cost for w, s in enumerate(scen)
        )
        per_uav.append(UavBreakdown(y, alloc.local[y], alloc.offload[y], s1, rec))
        fixed_rec = round(sum(
            (p * s.flags[y] * recourse[y][w] for w, (s, p) in enumerate(zip(scen, exact))), Fraction(0)
        ) * model.correction[y])
        fixed_total += model.stage1(y, alloc.local[y], alloc.offload[y]) + fixed_rec

    stage1 = math.fsum(b.stage1_cost for b in per_uav)
    expected = math.fsum(b.expected_recourse_cost for b in per_uav)
    return SolveReport(
        allocation=Allocation(alloc.local, alloc.offload, recourse),
        stage1_cost=stage1,
        expected_recourse_cost=expected,
        total_cost=stage1 + expected,
        per_uav=tuple(per_uav),
        nodes_explored=nodes_explored,
        method=method,
        objective_fixed=fixed_total,
        scale=scale,
        diagnostics=dict(diagnostics or {}),
    )


# -- branch and bound ----------------------------------------------------------------

@dataclass(frozen=True)
class _Option:
    cost: int
    offload: tuple[int, ...]
    local: int


def _uav_options(
    model: FixedPointCosts,
    y: int,
    capacities: Sequence[int],
    demand: int,
    max_total: int,
    stochastic: bool,
) -> list[_Option]:
    """Best local count for every admissible offload vector of one UAV."""
    bounds = [range(min(n, max_total) + 1) for n in capacities]
    options = []
    for off in itertools.product(*bounds):
        o = sum(off)
        if o > max_total:
            continue
        best = None
        for local in range(max(0, demand - o), max_total - o + 1):
            cost = model.uav_cost(y, local, off, stochastic)
            if best is None or cost < best.cost:
                best = _Option(cost, off, local)
        if best is not None:
            options.append(best)
    options.sort(key=lambda op: (op.cost, sum(op.offload), op.offload, op.local))
    return options


def _branch_and_bound(options: list[list[_Option]], capacities: Sequence[int]):
    Y, F = len(options), len(capacities)
    suffix = [0] * (Y + 1)
    for y in range(Y - 1, -1, -1):
        suffix[y] = suffix[y + 1] + options[y][0].cost

    best_key = None
    best_choice = None
    seen: dict[tuple, tuple] = {}
    nodes = 0
    # iterative DFS; stack entries: (depth, used, cost, flat, locals, choice)
    stack = [(0, (0,) * F, 0, (), (), ())]
    while stack:
        depth, used, cost, flat, locs, choice = stack.pop()
        nodes += 1
        if best_key is not None and cost + suffix[depth] > best_key[0]:
            continue
        if depth == Y:
            key = (cost, sum(used), flat, locs)
            if best_key is None or key < best_key:
                best_key, best_choice = key, choice
            continue
        state = (depth, used)
        mine = (cost, flat, locs)
        prior = seen.get(state)
        if prior is not None and prior <= mine:
            continue
        seen[state] = mine
        children = []
        for idx, op in enumerate(options[depth]):
            new_used = tuple(u + o for u, o in zip(used, op.offload))
            if any(u > c for u, c in zip(new_used, capacities)):
                continue
            children.append((depth + 1, new_used, cost + op.cost, flat + op.offload,
                             locs + (op.local,), choice + (idx,)))
        # cheapest child explored first
        stack.extend(reversed(children))
    return best_key, best_choice, nodes


def _solve(model, instance, demands, max_totals, stochastic):
    caps = instance.capacities
    options = [
        _uav_options(model, y, caps, demands[y], max_totals[y], stochastic) for y in range(instance.uav_count)
    ]
    if instance.uav_count == 0:
        return Allocation((), ()), 1
    _, choice, nodes = _branch_and_bound(options, caps)
    ops = [options[y][i] for y, i in enumerate(choice)]
    return Allocation(tuple(op.local for op in ops), tuple(op.offload for op in ops)), nodes


def solve_dip(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    shortfall: Sequence[int] | int = 0,
    *,
    scale: int = DEFAULT_SCALE,
) -> SolveReport:
    """Minimise the first-stage cost with a known per-UAV shortfall ``S``."""
    _check_dimensions(instance, rates, None)
    Y, k = instance.uav_count, instance.k
    S = [int(shortfall)] * Y if np.isscalar(shortfall) else [int(v) for v in shortfall]
    if len(S) != Y:
        raise DimensionError(f"{len(S)} shortfall values for {Y} UAVs")
    if any(v < 0 for v in S):
        raise ValidationError("shortfall must be nonnegative")
    model = FixedPointCosts(rates, None, k, scale=scale)
    demands = [k + s for s in S]
    alloc, nodes = _solve(model, instance, demands, demands, stochastic=False)
    return evaluate_total_cost(
        alloc, instance, rates, None, method="DIP", nodes_explored=nodes, scale=scale,
        diagnostics={"shortfall": S},
    )


def solve_sip(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    *,
    clamp: bool = False,
    scale: int = DEFAULT_SCALE,
) -> SolveReport:
    """Exact two-stage stochastic optimum with closed-form recourse."""
    _check_dimensions(instance, rates, scenarios)
    k = instance.k
    model = FixedPointCosts(rates, scenarios, k, clamp, scale)
    # copies beyond k + worst shortfall only add cost
    max_totals = [k + a for a in model.max_shortfall]
    alloc, nodes = _solve(model, instance, [k] * instance.uav_count, max_totals, stochastic=True)
    return evaluate_total_cost(
        alloc, instance, rates, scenarios, clamp=clamp, method="SIP", nodes_explored=nodes, scale=scale
    )


def rounded_shortfall(values, rounding: str = "half_up") -> list[int]:
    if rounding == "half_up":
        return [int(math.floor(v + 0.5)) for v in values]
    if rounding == "ceil":
        return [int(math.ceil(v - 1e-9)) for v in values]
    raise ValidationError(f"unknown EVF rounding {rounding!r}")


def solve_evf(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    *,
    clamp: bool = False,
    rounding: str = "half_up",
    scale: int = DEFAULT_SCALE,
) -> SolveReport:
    """Plan against the average shortfall, then score against every scenario."""
    _check_dimensions(instance, rates, scenarios)
    mean = expected_shortfall(scenarios)
    S = rounded_shortfall(mean, rounding)
    dip = solve_dip(instance, rates, S, scale=scale)
    return evaluate_total_cost(
        dip.allocation.first_stage(), instance, rates, scenarios, clamp=clamp, method="EVF",
        nodes_explored=dip.nodes_explored, scale=scale,
        diagnostics={"mean_shortfall": [float(v) for v in mean], "rounded_shortfall": S},
    )


# -- brute force ---------------------------------------------------------------------

def _oracle_recourse(rates, scenarios, k, clamp, scale, y, total, offloaded) -> int:
    """Expected recourse by explicit search for the smallest feasible correction."""
    a_max = scenarios.max_shortfall
    correction = to_fixed(rates[y].correction_cost, scale)
    expected = Fraction(0)
    for s, p in zip(scenarios, exact_probabilities(scenarios)):
        if not s.flags[y]:
            continue
        a = min(s.shortfalls[y], offloaded) if clamp else s.shortfalls[y]
        m_l = next(m for m in range(k + a_max + 1) if total + m - a >= k)
        expected += p * m_l
    return round(expected * correction)


def brute_force_oracle(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    *,
    clamp: bool = False,
    cap: int = DEFAULT_ORACLE_CAP,
    scale: int = DEFAULT_SCALE,
) -> SolveReport:
    """Enumerate every first-stage allocation with ``local <= k + A_max`` and
    ``offload[y][f] <= n_f``; return the same tie-broken optimum as ``solve_sip``."""
    _check_dimensions(instance, rates, scenarios)
    Y, F, k = instance.uav_count, len(instance.bss), instance.k
    caps = instance.capacities
    a_max = scenarios.max_shortfall

    # every UAV has the same number of candidate rows, so check the cap up front
    per_row = sum(
        max(0, k + a_max + 1 - max(0, k - sum(off)))
        for off in itertools.product(*(range(n + 1) for n in caps))
    )
    if per_row**Y > cap:
        raise OracleTooLargeError(f"oracle search space exceeds cap of {cap} allocations")

    per_uav = []
    for y, r in enumerate(rates):
        rows = []
        for off in itertools.product(*(range(n + 1) for n in caps)):
            o = sum(off)
            for local in range(0, k + a_max + 1):
                if local + o < k:
                    continue
                cost = (
                    local * to_fixed(r.local_cost, scale) + to_fixed(r.decode_cost, scale)
                    + sum(v * to_fixed(c, scale) for v, c in zip(off, r.offload_cost))
                    + _oracle_recourse(rates, scenarios, k, clamp, scale, y, local + o, o)
                )
                rows.append((cost, local, *off))
        per_uav.append(np.array(rows, dtype=np.int64).reshape(-1, 2 + F))

    # cartesian product of UAVs 1..Y-1, flattened
    rest_cost = np.zeros(1, dtype=np.int64)
    rest_cols = np.zeros((1, 0), dtype=np.int64)  # per UAV: offload..., then locals appended later
    rest_locals = np.zeros((1, 0), dtype=np.int64)
    rest_load = np.zeros((1, F), dtype=np.int64)
    for tab in per_uav[1:]:
        n_prev, n_new = len(rest_cost), len(tab)
        rest_cost = (rest_cost[:, None] + tab[None, :, 0]).reshape(-1)
        rest_cols = np.concatenate(
            [np.repeat(rest_cols, n_new, axis=0), np.tile(tab[:, 2:], (n_prev, 1))], axis=1)
        rest_locals = np.concatenate(
            [np.repeat(rest_locals, n_new, axis=0), np.tile(tab[:, 1:2], (n_prev, 1))], axis=1)
        rest_load = (rest_load[:, None, :] + tab[None, :, 2:]).reshape(-1, F)
    rest_off_total = rest_cols.sum(axis=1)

    best = None
    for row in per_uav[0]:
        cost0, local0, off0 = int(row[0]), int(row[1]), tuple(int(v) for v in row[2:])
        load = rest_load + np.array(off0, dtype=np.int64)
        feasible = np.all(load <= np.array(caps), axis=1)
        if not feasible.any():
            continue
        costs = np.where(feasible, rest_cost, np.iinfo(np.int64).max)
        idx = np.flatnonzero(costs == costs.min())
        # lexicographic tie-break within this slice
        for col in [rest_off_total, *rest_cols.T, *rest_locals.T]:
            vals = col[idx]
            idx = idx[vals == vals.min()]
        i = int(idx[0])
        flat = off0 + tuple(int(v) for v in rest_cols[i])
        locs = (local0, *(int(v) for v in rest_locals[i]))
        key = (cost0 + int(rest_cost[i]), sum(flat), flat, locs)
        if best is None or key < best:
            best = key

    _, _, flat, locs = best
    offload = tuple(flat[y * F:(y + 1) * F] for y in range(Y))
    return evaluate_total_cost(
        Allocation(locs, offload), instance, rates, scenarios, clamp=clamp, method="ORACLE",
        nodes_explored=per_row**Y, scale=scale,
    )
