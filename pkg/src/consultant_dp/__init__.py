"""Optimal sequential consultation in a two-state investment problem.

The investor holds a belief ``p`` that the state is ``r``, may pay ``c`` to
query a consultant and update ``p`` by Bayes rule, and eventually invests in
``R`` or ``L``. This package computes the optimal value and policy on a belief
grid or, when every likelihood ratio is a power of a common base, exactly on a
finite lattice of beliefs.
"""

from .grid_solver import GridConfig, Solution, Thresholds, bellman_backup, solve_grid, thresholds, value_at
from .lattice_solver import (Lattice, LatticeSpec, PiecewiseLinear, build_lattice, detect_rational_ratio,
                             lattice_value, piecewise_extract, piecewise_thresholds, prior_sweep, solve_lattice)
from .model import (STOP_L, STOP_R, Belief, Consult, Consultant, Decision, InfiniteLogOddsStep, Payoffs,
                    Problem, Violation, ZeroProbabilitySignal, check_problem, estimator, log_odds_update,
                    posterior, signal_prob, stopping_value, validate_problem)
from .montecarlo import (SimulationReport, SimulationTrace, consult_until_reveal, decomposition_check,
                         never_consult, shift_policy, simulate_policy, simulate_trace, solution_policy)
from .theory import (HalfPolicyClass, RevealerAnalysis, RevealerBand, ThreeSignalParams, brute_force_value,
                     classify_half_policy, make_three_signal, nonreveal_upper_bound, qt_reduce,
                     reachable_decisions, revealer_band, revealer_lower_bound, revealing_cost_threshold,
                     solve_auto, three_signal_params, verify_revealer_usage)

__all__ = [name for name in dir() if not name.startswith("_")]
