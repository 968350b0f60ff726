"""Command-line entry point.

    coded-offload solve --mode sip --config run.toml --out results/
    coded-offload experiment scalability --seed 3
    coded-offload validate-scenarios --scenario-file scen.csv
    coded-offload show-config

Exit codes: 0 success, 2 validation error, 3 infeasible or over a size cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .config import RunConfig, build_instance, build_scenarios, load_config
from .errors import CapacityError, ValidationError
from .scenarios import expected_shortfall, format_scenarios
from .solver import (
    Allocation,
    SolveReport,
    UavBreakdown,
    brute_force_oracle,
    solve_dip,
    solve_evf,
    solve_sip,
)

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE = 0, 2, 3


@dataclass(frozen=True)
class SolveReportRecord:
    report: SolveReport
    config_hash: str
    timestamp: str | None
    version: str

    def to_dict(self) -> dict:
        r = self.report
        return {
            "version": self.version,
            "config_hash": self.config_hash,
            "timestamp": self.timestamp,
            "method": r.method,
            "stage1_cost": r.stage1_cost,
            "expected_recourse_cost": r.expected_recourse_cost,
            "total_cost": r.total_cost,
            "objective_fixed": r.objective_fixed,
            "scale": r.scale,
            "nodes_explored": r.nodes_explored,
            "local": list(r.allocation.local),
            "offload": [list(row) for row in r.allocation.offload],
            "recourse": [list(row) for row in r.allocation.recourse],
            "per_uav": [
                {
                    "uav": b.uav,
                    "local": b.local,
                    "offload": list(b.offload),
                    "stage1_cost": b.stage1_cost,
                    "expected_recourse_cost": b.expected_recourse_cost,
                }
                for b in r.per_uav
            ],
            "diagnostics": r.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReportRecord":
        report = SolveReport(
            allocation=Allocation(d["local"], d["offload"], d["recourse"]),
            stage1_cost=d["stage1_cost"],
            expected_recourse_cost=d["expected_recourse_cost"],
            total_cost=d["total_cost"],
            per_uav=tuple(
                UavBreakdown(b["uav"], b["local"], tuple(b["offload"]), b["stage1_cost"], b["expected_recourse_cost"])
                for b in d["per_uav"]
            ),
            nodes_explored=d["nodes_explored"],
            method=d["method"],
            objective_fixed=d["objective_fixed"],
            scale=d["scale"],
            diagnostics=d["diagnostics"],
        )
        return cls(report, d["config_hash"], d["timestamp"], d["version"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def run_timestamp() -> str | None:
    # wall-clock time would break byte-identical reruns
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def format_summary(report: SolveReport, cfg_hash: str) -> str:
    lines = [
        f"method: {report.method}    config: {cfg_hash}    version: {__version__}",
        f"stage-1 cost:            {report.stage1_cost:.6f}",
        f"expected recourse cost:  {report.expected_recourse_cost:.6f}",
        f"total cost:              {report.total_cost:.6f}",
        f"nodes explored:          {report.nodes_explored}",
        "",
    ]
    F = len(report.allocation.offload[0]) if report.allocation.offload else 0
    head = ["uav", "local", *(f"bs{f + 1}" for f in range(F)), "stage1", "E[recourse]"]
    lines.append("  ".join(f"{h:>11}" for h in head))
    for b in report.per_uav:
        cells = [b.uav + 1, b.local, *b.offload, f"{b.stage1_cost:.4f}", f"{b.expected_recourse_cost:.4f}"]
        lines.append("  ".join(f"{c!s:>11}" for c in cells))
    return "\n".join(lines) + "\n"


def format_allocation_csv(report: SolveReport) -> str:
    F = len(report.allocation.offload[0]) if report.allocation.offload else 0
    rows = ["uav,local," + ",".join(f"offload_bs{f + 1}" for f in range(F)) + ",stage1_cost,expected_recourse_cost"]
    for b in report.per_uav:
        rows.append(",".join(map(str, [b.uav + 1, b.local, *b.offload, repr(b.stage1_cost),
                                       repr(b.expected_recourse_cost)])))
    return "\n".join(rows) + "\n"


# -- config plumbing ---------------------------------------------------------------

def effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace("experiments", seed=args.seed)
        cfg = cfg.replace("scenarios", seed=args.seed)
    if args.scenario_file is not None:
        cfg = cfg.replace("scenarios", file=args.scenario_file)
    if args.clamp_shortfall:
        cfg = cfg.replace("solver", clamp_shortfall=True)
    if args.bits_per_symbol is not None:
        if not args.bits_per_symbol > 0:
            raise ValidationError("--bits-per-symbol must be > 0")
        cfg = cfg.replace("coding", bits_per_symbol=float(args.bits_per_symbol))
    if args.weight_is_force:
        cfg = cfg.replace("rotorcraft", weight_is_force=True)
    if getattr(args, "mode", None) is not None:
        cfg = cfg.replace("solver", mode=args.mode)
    if args.out is not None:
        cfg = cfg.replace(output_dir=args.out)
    return cfg


def _parse_shortfall(text: str | None, Y: int) -> list[int]:
    if text is None:
        return [0] * Y
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"--shortfall expects integers, got {text!r}") from None
    if len(values) == 1:
        values *= Y
    if len(values) != Y:
        raise ValidationError(f"--shortfall needs 1 or {Y} values")
    return values


def _header(cfg: RunConfig) -> list[str]:
    return [f"config_hash: {cfg.config_hash()}", f"version: {__version__}"]


# -- subcommands ------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, shortfall: str | None = None) -> int:
    inst = build_instance(cfg)
    rates = inst.rates()
    mode = cfg.solver.mode
    clamp = cfg.solver.clamp_shortfall
    kw = {"scale": cfg.solver.scale}
    if mode == "dip":
        report = solve_dip(inst, rates, _parse_shortfall(shortfall, inst.uav_count), **kw)
    else:
        scen = build_scenarios(cfg, inst.uav_count, inst.k)
        if mode == "sip":
            report = solve_sip(inst, rates, scen, clamp=clamp, **kw)
        elif mode == "evf":
            report = solve_evf(inst, rates, scen, clamp=clamp, rounding=cfg.solver.evf_rounding, **kw)
        else:
            report = brute_force_oracle(inst, rates, scen, clamp=clamp, cap=cfg.solver.oracle_cap, **kw)

    cfg_hash = cfg.config_hash()
    record = SolveReportRecord(report, cfg_hash, run_timestamp(), __version__)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = format_summary(report, cfg_hash)
    (out / f"solve_{mode}.json").write_text(record.dumps())
    (out / f"solve_{mode}_allocation.csv").write_text(format_allocation_csv(report))
    (out / f"solve_{mode}_summary.txt").write_text(summary)
    sys.stdout.write(summary)
    return EXIT_OK


def _experiment_cost_structure(cfg: RunConfig):
    inst = build_instance(cfg)
    rates = inst.rates()
    e = cfg.experiments
    prim, prim_rates = ex.primitive_network(
        inst, rates, workers=e.cost_structure_workers, local_cost=e.prohibitive_local_cost
    )
    scen = build_scenarios(cfg, 1, inst.k)
    return ex.run_cost_structure_sweep(
        prim, prim_rates, scen, range(inst.k, e.cost_structure_offload_max + 1), clamp=cfg.solver.clamp_shortfall
    )


def _experiment_scalability(cfg: RunConfig):
    inst = build_instance(cfg)
    e = cfg.experiments
    base = inst.subset(min(e.scalability_max_uavs, inst.uav_count))
    return ex.run_scalability_sweep(
        base, inst.rates(), lambda Y: build_scenarios(cfg, Y, inst.k), range(1, base.uav_count + 1),
        kink_factor=e.kink_factor, clamp=cfg.solver.clamp_shortfall,
    )


def _experiment_evf(cfg: RunConfig):
    e = cfg.experiments
    inst = build_instance(cfg)
    inst = inst.with_capacities([e.evf_workers] * len(inst.bss))
    prices = [float(v) for v in np.linspace(e.evf_price_min, e.evf_price_max, e.evf_points)]
    return ex.run_evf_comparison_sweep(
        inst, inst.rates(), build_scenarios(cfg, inst.uav_count, inst.k), prices,
        rounding=cfg.solver.evf_rounding, clamp=cfg.solver.clamp_shortfall,
    )


def _experiment_monte_carlo(cfg: RunConfig):
    inst = build_instance(cfg)
    rates = inst.rates()
    scen = build_scenarios(cfg, inst.uav_count, inst.k)
    clamp = cfg.solver.clamp_shortfall
    sip = solve_sip(inst, rates, scen, clamp=clamp)
    rec = ex.monte_carlo_validate(
        sip.allocation, inst, rates, scen, cfg.experiments.mc_trials, cfg.experiments.seed, clamp=clamp
    )
    return ex.SweepResult(
        "monte_carlo", "trials", [rec.trials],
        {"analytic": [rec.analytic], "empirical_mean": [rec.empirical_mean],
         "standard_error": [rec.standard_error], "z_score": [rec.z_score]},
        [rec], {"seed": rec.seed},
    )


EXPERIMENTS = {
    "cost-structure": _experiment_cost_structure,
    "scalability": _experiment_scalability,
    "evf-compare": _experiment_evf,
    "monte-carlo": _experiment_monte_carlo,
}


def cmd_experiment(cfg: RunConfig, which: str) -> int:
    names = list(EXPERIMENTS) if which == "all" else [which]
    for name in names:
        result = EXPERIMENTS[name](cfg)
        table, plot = ex.write_sweep(result, cfg.output_dir, _header(cfg))
        print(f"{name}: wrote {table} and {plot}")
        for key, value in sorted(result.metadata.items()):
            print(f"  {key}: {value}")
    return EXIT_OK


def cmd_validate_scenarios(cfg: RunConfig, export: str | None = None) -> int:
    inst_k = build_instance(cfg).k
    scen = build_scenarios(cfg, cfg.network.uav_count, inst_k)
    mean = expected_shortfall(scen)
    print(f"{len(scen)} scenarios over {scen.uav_count} UAVs (k={inst_k}); probabilities sum to 1")
    print("expected shortfall per UAV: " + ", ".join(f"{v:.6g}" for v in mean))
    if export:
        Path(export).write_text(format_scenarios(scen))
        print(f"wrote {export}")
    return EXIT_OK


def cmd_show_config(cfg: RunConfig) -> int:
    print(f"# config_hash: {cfg.config_hash()}")
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=str))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration (defaults to the built-in parameters)")
    common.add_argument("--seed", type=int, help="seed for sampling and Monte-Carlo runs")
    common.add_argument("--out", help="output directory")
    common.add_argument("--scenario-file", help="scenario CSV (p, F_1..F_Y, A_1..A_Y)")
    common.add_argument("--clamp-shortfall", action="store_true",
                        help="cap each shortfall at the number of copies actually offloaded")
    common.add_argument("--bits-per-symbol", type=float, help="bits per matrix symbol (default 64)")
    common.add_argument("--weight-is-force", action="store_true",
                        help="treat rotorcraft.weight as newtons instead of kilograms")

    parser = argparse.ArgumentParser(prog="coded-offload", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one allocation problem")
    p.add_argument("--mode", choices=["dip", "sip", "evf", "oracle"])
    p.add_argument("--shortfall", help="DIP shortfall: one integer or one per UAV, comma separated")

    p = sub.add_parser("experiment", parents=[common], help="run a sweep")
    p.add_argument("which", choices=[*EXPERIMENTS, "all"])

    p = sub.add_parser("validate-scenarios", parents=[common], help="check the scenario source")
    p.add_argument("--export", help="write the validated scenario set to this CSV file")

    sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        if args.command == "solve":
            return cmd_solve(cfg, args.shortfall)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.which)
        if args.command == "validate-scenarios":
            return cmd_validate_scenarios(cfg, args.export)
        return cmd_show_config(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
