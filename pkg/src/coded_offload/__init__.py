"""Cost-optimal allocation of coded matrix-multiplication copies between UAVs
and base-station workers under stochastic shortfall."""

from .coding import CodingParams, SymbolCounts, recovery_threshold, select_split, symbol_counts
from .energy import (
    BsSpec,
    CostCoefficients,
    CostRates,
    NetworkInstance,
    RadioConstants,
    RotorcraftParams,
    UavSpec,
    cost_rates,
    hover_power,
    propulsion_power,
)
from .scenarios import Scenario, ScenarioSet, expected_shortfall, generate_independent, validate
from .solver import (
    Allocation,
    SolveReport,
    brute_force_oracle,
    evaluate_total_cost,
    recourse_copies,
    solve_dip,
    solve_evf,
    solve_sip,
)

__version__ = "0.1.0"
