"""Scripted studies: topology generation, parameter sweeps, Monte-Carlo checks."""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .energy import CostRates, NetworkInstance
from .errors import InfeasiblePointError, PlacementError
from .scenarios import ScenarioSet, sample_indices
from .solver import Allocation, evaluate_total_cost, recourse_copies, solve_evf, solve_sip


@dataclass(frozen=True)
class Topology:
    uav_positions: tuple[tuple[float, float], ...]
    bs_positions: tuple[tuple[float, float], ...]
    field_size: float
    grid_cell: float
    seed: int


def generate_topology(Y: int, F: int, field_size: float = 1000.0, grid: float = 25.0, seed: int = 0) -> Topology:
    """Place UAVs and base stations in distinct grid cells, uniformly at random.

    Positions are the lower-left corners of the chosen cells, so every
    coordinate is a multiple of ``grid`` inside ``[0, field_size]``.
    """
    if Y < 1 or F < 1:
        raise PlacementError("need at least one UAV and one base station")
    per_side = int(field_size // grid)
    cells = per_side * per_side
    if Y + F > cells:
        raise PlacementError(f"{Y + F} entities do not fit in {cells} grid cells")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(cells, size=Y + F, replace=False)
    xy = [(float(c % per_side) * grid, float(c // per_side) * grid) for c in chosen]
    return Topology(tuple(xy[:Y]), tuple(xy[Y:]), float(field_size), float(grid), seed)


# -- sweeps --------------------------------------------------------------------------

HUGE_CAPACITY = 10**4


@dataclass
class SweepResult:
    name: str
    sweep_variable: str
    values: list
    series: dict[str, list]
    reports: list
    metadata: dict = dataclasses.field(default_factory=dict)


def primitive_network(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    *,
    workers: int = 100,
    local_cost: float = 1e6,
    uav_index: int = 0,
    bs_index: int = 0,
) -> tuple[NetworkInstance, list[CostRates]]:
    """One UAV, one BS, with local computation priced out of the first stage."""
    bs = instance.bss[bs_index]
    inst = NetworkInstance(
        (instance.uavs[uav_index],), (bs,), instance.coding, instance.radio, instance.coefficients,
        instance.bits_per_symbol,
    ).with_capacities([workers])
    r = rates[uav_index]
    priced = CostRates(local_cost, (r.offload_cost[bs_index],), r.decode_cost, r.correction_cost)
    return inst, [priced]


def run_cost_structure_sweep(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    offload_range: Sequence[int],
    *,
    clamp: bool = False,
) -> SweepResult:
    """Stage-1, expected stage-2 and total cost for forced offload counts."""
    if len(instance.bss) != 1:
        raise InfeasiblePointError("cost-structure sweep expects a single base station")
    k, cap, Y = instance.k, instance.capacities[0], instance.uav_count
    series = {"stage1": [], "stage2": [], "total": []}
    reports = []
    for x in offload_range:
        if x < k:
            raise InfeasiblePointError(f"offload count {x} is below the recovery threshold k={k}")
        if x * Y > cap:
            raise InfeasiblePointError(f"offload count {x} exceeds {cap} workers")
        alloc = Allocation((0,) * Y, ((x,),) * Y)
        rep = evaluate_total_cost(alloc, instance, rates, scenarios, clamp=clamp, method="FORCED")
        reports.append(rep)
        series["stage1"].append(rep.stage1_cost)
        series["stage2"].append(rep.expected_recourse_cost)
        series["total"].append(rep.total_cost)
    sip = solve_sip(instance, rates, scenarios, clamp=clamp)
    return SweepResult(
        "cost_structure", "offloaded_copies", list(offload_range), series, reports,
        {"sip_total": sip.total_cost, "sip_offload": list(sip.allocation.offload_totals),
         "sip_local": list(sip.allocation.local)},
    )


def detect_kink(totals: Sequence[float], factor: float = 3.0) -> tuple[list[float | None], int | None]:
    """Backward second differences and the index of the first kink.

    The score at index ``i`` is ``T[i] - 2 T[i-1] + T[i-2]`` (the jump in
    marginal cost when point ``i`` is added).  A kink is the first score that
    exceeds ``factor`` times the median absolute score.
    """
    scores: list[float | None] = [None, None] + [
        totals[i] - 2 * totals[i - 1] + totals[i - 2] for i in range(2, len(totals))
    ]
    valid = [abs(s) for s in scores if s is not None]
    if not valid:
        return scores, None
    scale = float(np.median(valid))
    for i, s in enumerate(scores):
        # tolerance absorbs float noise when the curve is exactly linear
        if s is not None and s > factor * scale and s > 1e-9 * max(1.0, abs(totals[i])):
            return scores, i
    return scores, None


def run_scalability_sweep(
    base_instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenario_factory: Callable[[int], ScenarioSet],
    Y_range: Sequence[int],
    *,
    kink_factor: float = 3.0,
    clamp: bool = False,
) -> SweepResult:
    """Optimal SIP cost as UAVs join, with capacity-relaxed demand alongside."""
    capacity = sum(base_instance.capacities)
    series = {"total": [], "relaxed_total": [], "offload_demand": [], "capacity": [], "offloaded": []}
    reports = []
    for Y in Y_range:
        inst = base_instance.subset(Y)
        scen = scenario_factory(Y)
        rep = solve_sip(inst, rates[:Y], scen, clamp=clamp)
        relaxed = solve_sip(inst.with_capacities([HUGE_CAPACITY] * len(inst.bss)), rates[:Y], scen, clamp=clamp)
        reports.append(rep)
        series["total"].append(rep.total_cost)
        series["relaxed_total"].append(relaxed.total_cost)
        series["offload_demand"].append(sum(relaxed.allocation.offload_totals))
        series["capacity"].append(capacity)
        series["offloaded"].append(sum(rep.allocation.offload_totals))
    scores, idx = detect_kink(series["total"], kink_factor)
    series["kink_score"] = scores
    return SweepResult(
        "scalability", "uav_count", list(Y_range), series, reports,
        {"kink_at": None if idx is None else list(Y_range)[idx], "kink_factor": kink_factor},
    )


def scale_correction(rates: Sequence[CostRates], multiplier: float) -> list[CostRates]:
    return [dataclasses.replace(r, correction_cost=r.correction_cost * multiplier) for r in rates]


def run_evf_comparison_sweep(
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    correction_price_range: Sequence[float],
    *,
    rounding: str = "half_up",
    clamp: bool = False,
) -> SweepResult:
    """SIP versus expected-value planning as the correction price varies."""
    series = {"sip_total": [], "evf_total": [], "gap": [], "sip_stage1": [], "evf_stage1": []}
    reports = []
    for mult in correction_price_range:
        r = scale_correction(rates, mult)
        sip = solve_sip(instance, r, scenarios, clamp=clamp)
        evf = solve_evf(instance, r, scenarios, clamp=clamp, rounding=rounding)
        reports.append((sip, evf))
        series["sip_total"].append(sip.total_cost)
        series["evf_total"].append(evf.total_cost)
        # exact gap from the fixed-point objectives
        series["gap"].append((evf.objective_fixed - sip.objective_fixed) / sip.scale)
        series["sip_stage1"].append(sip.stage1_cost)
        series["evf_stage1"].append(evf.stage1_cost)
    return SweepResult("evf_compare", "correction_price_multiplier", list(correction_price_range), series, reports)


@dataclass(frozen=True)
class MonteCarloRecord:
    analytic: float
    empirical_mean: float
    standard_error: float
    trials: int
    seed: int

    @property
    def z_score(self) -> float:
        if self.standard_error == 0:
            return 0.0 if self.empirical_mean == self.analytic else math.inf
        return (self.empirical_mean - self.analytic) / self.standard_error


def realized_recourse_costs(
    alloc: Allocation, rates: Sequence[CostRates], scenarios: ScenarioSet, k: int, clamp: bool = False
) -> np.ndarray:
    totals, offl = alloc.totals, alloc.offload_totals
    out = np.empty(len(scenarios))
    for w, s in enumerate(scenarios):
        copies = recourse_copies(totals, s, k, offl, clamp)
        out[w] = math.fsum(f * m * r.correction_cost for f, m, r in zip(s.flags, copies, rates))
    return out


def monte_carlo_validate(
    alloc: Allocation,
    instance: NetworkInstance,
    rates: Sequence[CostRates],
    scenarios: ScenarioSet,
    trials: int,
    seed: int,
    *,
    clamp: bool = False,
) -> MonteCarloRecord:
    """Compare the analytic expected recourse cost with a sampled average."""
    analytic = evaluate_total_cost(alloc.first_stage(), instance, rates, scenarios, clamp=clamp)
    per_scenario = realized_recourse_costs(alloc, rates, scenarios, instance.k, clamp)
    draws = per_scenario[sample_indices(scenarios, trials, seed)]
    se = float(draws.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloRecord(analytic.expected_recourse_cost, float(draws.mean()), se, trials, seed)


# -- output --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_sweep_table(result: SweepResult, header_lines: Sequence[str] = ()) -> str:
    cols = [result.sweep_variable, *result.series]
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(f"# sweep: {result.name}\n")
    buf.write(f"# columns: {', '.join(cols)}\n")
    for key, value in sorted(result.metadata.items()):
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join(cols) + "\n")
    for i, x in enumerate(result.values):
        buf.write(",".join([_fmt(x), *(_fmt(result.series[c][i]) for c in result.series)]) + "\n")
    return buf.getvalue()


def format_plot_data(result: SweepResult) -> str:
    cols = [result.sweep_variable, *(c for c in result.series if all(v is not None for v in result.series[c]))]
    lines = ["# " + " ".join(cols)]
    for i, x in enumerate(result.values):
        lines.append(" ".join(_fmt(v) for v in [x, *(result.series[c][i] for c in cols[1:])]))
    return "\n".join(lines) + "\n"


def write_sweep(result: SweepResult, out_dir: str | Path, header_lines: Sequence[str] = ()) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / f"{result.name}.csv"
    plot = out / f"{result.name}_plot.dat"
    table.write_text(format_sweep_table(result, header_lines))
    plot.write_text(format_plot_data(result))
    return table, plot
