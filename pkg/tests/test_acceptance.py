"""End-to-end acceptance checks, one per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible in the
captured ``pytest -v`` log) before asserting.
"""

import math
import time

import numpy as np
import pytest

from coded_offload import experiments as ex
from coded_offload.cli import main
from coded_offload.coding import select_split
from coded_offload.config import build_scenarios
from coded_offload.energy import (
    RadioConstants,
    RotorcraftParams,
    channel_gain,
    link_rate,
    propulsion_power,
)
from coded_offload.errors import OracleTooLargeError
from coded_offload.scenarios import Scenario
from coded_offload.solver import brute_force_oracle, evaluate_total_cost, recourse_copies, solve_sip

from conftest import random_problem, ref_bs, ref_uav


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_1_split_selection(verdict):
    select_split(2)  # warm up imports and caches
    t0 = time.perf_counter()
    p = select_split(2)
    dt = time.perf_counter() - t0
    ok = (p.s, p.t, p.k) == (1, 2, 4) and dt < 1e-3
    assert verdict(1, ok, f"s={p.s} t={p.t} k={p.k} in {dt * 1e6:.1f} us")


def test_2_hover_power_identity(verdict):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        W, rho, R, A, omega, U, s, d0, v0, delta, kk = rng.uniform(0.1, 10, 11) * [
            100, 1, 1, 1, 400, 200, 0.05, 1, 7, 0.01, 0.1]
        r = RotorcraftParams(W, rho, R, A, omega, U, s, d0, v0, delta, kk)
        p0 = delta / 8 * rho * s * A * omega**3 * R**3
        p1 = (1 + kk) * W**1.5 / math.sqrt(2 * rho * A)
        worst = max(worst, abs(propulsion_power(0.0, r) - (p0 + p1)) / (p0 + p1))
    assert verdict(2, worst <= 1e-12, f"max relative error {worst:.2e} over 1000 parameter sets")


def _constraints_hold(rep, inst, scen):
    a = rep.allocation
    k = inst.k
    if any(l < 0 for l in a.local) or any(o < 0 for row in a.offload for o in row):
        return False
    if any(l + sum(row) < k for l, row in zip(a.local, a.offload)):
        return False
    if any(load > n for load, n in zip(a.bs_load, inst.capacities)):
        return False
    for w, s in enumerate(scen):
        for y in range(inst.uav_count):
            if a.totals[y] + a.recourse[y][w] - s.flags[y] * s.shortfalls[y] < k:
                return False
    return True


def test_3_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    checked = mismatches = violations = 0
    seed = 0
    while checked < 200:
        inst, rates, scen = random_problem(seed, max_uavs=3, max_bs=2, max_workers=5, max_shortfall=None)
        seed += 1
        try:
            oracle = brute_force_oracle(inst, rates, scen)
        except OracleTooLargeError:
            continue
        sip = solve_sip(inst, rates, scen)
        checked += 1
        mismatches += sip.objective_fixed != oracle.objective_fixed
        evaluate_total_cost(sip.allocation, inst, rates, scen)
        violations += not _constraints_hold(sip, inst, scen)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and violations == 0 and dt < 60
    assert verdict(3, ok, f"{checked} instances, {mismatches} objective mismatches, "
                          f"{violations} constraint violations, {dt:.1f} s")


def test_4_recourse_closed_form(verdict):
    rng = np.random.default_rng(4)
    mismatches = 0
    trials = 10_000
    for _ in range(trials):
        k = int(rng.integers(1, 10))
        a_max = int(rng.integers(1, k + 1))
        Y = int(rng.integers(1, 4))
        totals = [int(v) for v in rng.integers(k, k + a_max + 2, size=Y)]
        flags = tuple(int(v) for v in rng.integers(0, 2, size=Y))
        shortfalls = tuple(int(rng.integers(1, a_max + 1)) if f else 0 for f in flags)
        got = recourse_copies(totals, Scenario(flags, shortfalls, 1.0), k)
        want = tuple(
            min(m for m in range(k + a_max + 1) if t + m - f * a >= k)
            for t, f, a in zip(totals, flags, shortfalls)
        )
        mismatches += got != want
    assert verdict(4, mismatches == 0, f"{trials} triples, {mismatches} mismatches")


def test_5_evf_dominance(verdict, default_config, default_instance):
    e = default_config.experiments
    inst = default_instance.with_capacities([e.evf_workers] * len(default_instance.bss))
    scen = build_scenarios(default_config, inst.uav_count, inst.k)
    prices = [float(v) for v in np.linspace(e.evf_price_min, e.evf_price_max, 20)]
    t0 = time.perf_counter()
    res = ex.run_evf_comparison_sweep(inst, inst.rates(), scen, prices)
    dt = time.perf_counter() - t0
    gaps = res.series["gap"]
    ok = all(g >= 0 for g in gaps) and any(g > 0 for g in gaps) and dt < 300
    assert verdict(5, ok, f"min gap {min(gaps):.4g}, max gap {max(gaps):.4g}, "
                          f"{sum(g > 0 for g in gaps)}/20 strict, {dt:.1f} s")


def test_6_cost_structure_shape(verdict, default_config, default_instance):
    e = default_config.experiments
    prim, rates = ex.primitive_network(
        default_instance, default_instance.rates(),
        workers=e.cost_structure_workers, local_cost=e.prohibitive_local_cost,
    )
    scen = build_scenarios(default_config, 1, default_instance.k)
    res = ex.run_cost_structure_sweep(prim, rates, scen, range(default_instance.k, e.cost_structure_offload_max + 1))
    s1, s2, tot = (res.series[c] for c in ("stage1", "stage2", "total"))
    best = min(range(len(tot)), key=lambda i: tot[i])
    ok = (
        all(b > a for a, b in zip(s1, s1[1:]))
        and all(b <= a for a, b in zip(s2, s2[1:]))
        and 0 < best < len(tot) - 1
        and res.metadata["sip_offload"] == [res.values[best]]
        and math.isclose(tot[best], res.metadata["sip_total"], rel_tol=1e-12)
    )
    assert verdict(6, ok, f"interior minimum at {res.values[best]} offloaded copies, "
                          f"SIP offloads {res.metadata['sip_offload'][0]}")


def test_7_scalability_kink(verdict, default_config, default_instance):
    factory = lambda Y: build_scenarios(default_config, Y, default_instance.k)  # noqa: E731
    rates = default_instance.rates()
    res = ex.run_scalability_sweep(default_instance, rates, factory, range(1, 11))
    cap = sum(default_instance.capacities)
    first_over = next((Y for Y, d in zip(res.values, res.series["offload_demand"]) if d > cap), None)
    huge = default_instance.with_capacities([10**4] * len(default_instance.bss))
    relaxed = ex.run_scalability_sweep(huge, rates, factory, range(1, 11))
    ok = first_over is not None and res.metadata["kink_at"] == first_over and relaxed.metadata["kink_at"] is None
    assert verdict(7, ok, f"demand first exceeds {cap} workers at Y={first_over}, "
                          f"kink at Y={res.metadata['kink_at']}, relaxed kink {relaxed.metadata['kink_at']}")


def test_8_monte_carlo(verdict, default_config, default_instance, default_scenarios):
    rates = default_instance.rates()
    alloc = solve_sip(default_instance, rates, default_scenarios).allocation
    rec = ex.monte_carlo_validate(alloc, default_instance, rates, default_scenarios, 100_000,
                                  default_config.experiments.seed)
    ok = abs(rec.z_score) <= 4
    assert verdict(8, ok, f"analytic {rec.analytic:.4f}, empirical {rec.empirical_mean:.4f}, "
                          f"z = {rec.z_score:.2f}")


def test_9_determinism(verdict, tmp_path, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    for run in ("a", "b"):
        for mode in ("dip", "sip", "evf"):
            assert main(["solve", "--mode", mode, "--seed", "5", "--out", str(tmp_path / run)]) == 0
        assert main(["experiment", "all", "--seed", "5", "--out", str(tmp_path / run)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    differing = [n for n in names if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
    ok = len(names) == 17 and not differing
    assert verdict(9, ok, f"{len(names)} files compared, {len(differing)} differ")


def test_10_link_fixtures(verdict):
    radio = RadioConstants(noise_power=1e-13, reference_gain=1e-6)
    uav, bs = ref_uav(0, 0, 100), ref_bs(80, 0)
    # hand-derived: D = 80 m, so h = 1e-6 / 80^2, SNR = 0.032 h / 1e-13, R = 2e6 log2(51)
    h = channel_gain((0, 0, 100), (80, 0, 100), radio)
    snr = uav.tx_power * h / radio.noise_power
    uav80 = ref_uav(0, 0, 20)
    rate = link_rate(uav80, bs, radio)
    errs = [abs(h - 1.5625e-10) / 1.5625e-10, abs(snr - 50) / 50, abs(rate - 11344850.68) / 11344850.68]
    ok = max(errs) <= 1e-6
    assert verdict(10, ok, f"gain {h:.6g}, SNR {snr:.6g}, rate {rate:.8g} bit/s, "
                           f"max relative error {max(errs):.1e}")
