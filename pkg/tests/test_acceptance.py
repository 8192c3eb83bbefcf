"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) for the summary alone, or
under pytest where the lines are repeated in the terminal summary.
"""

from __future__ import annotations

import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from instances import oracle_problem, property_problem, revealer_instance  # noqa: E402

from consultant_dp.grid_solver import GridConfig, solve_grid, stopping_value, thresholds, value_at  # noqa: E402
from consultant_dp.lattice_solver import (LatticeTooLarge, detect_rational_ratio,  # noqa: E402
                                          lattice_value, piecewise_extract, prior_sweep, solve_lattice)
from consultant_dp.model import Consult, Problem, estimator, posterior, signal_prob  # noqa: E402
from consultant_dp.montecarlo import decomposition_check, simulate_policy  # noqa: E402
from consultant_dp.presets import (example1, example2, example3_consultant, example4_g1, example4_g2,  # noqa: E402
                                   example4_j1, example4_j2)
from consultant_dp.theory import (brute_force_value, qt_reduce, revealing_cost_threshold,  # noqa: E402
                                  three_signal_params, verify_revealer_usage)

EXAMPLE1_TABLE = (0.025, 0.088, 0.367, 0.633, 0.912, 0.975)
EXAMPLE2_COSTS = (0.02, 0.05, 0.1, 0.2, 0.3)

# Band of costs where "consult the estimator until the net count is +-2" is
# optimal for the 0.8 estimator at prior 1/2. Derived in tests/test_theory.py
# from the closed-form values of the symmetric net-count rules.
G1_BAND = (Fraction(48, 2105), Fraction(4, 55))


def report(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {name} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _boundaries(sol):
    """Beliefs where the tie-broken decision changes (midpoint of the two grid points)."""
    labels = [str(d) for d in sol.policy]
    return [0.5 * (sol.grid[i] + sol.grid[i + 1]) for i in range(len(labels) - 1) if labels[i] != labels[i + 1]]


def test_criterion_1_example1_table():
    t0 = time.perf_counter()
    sol = solve_grid(example1(cost=0.01), GridConfig(grid_size=4001, tol=1e-10))
    elapsed = time.perf_counter() - t0
    bounds = _boundaries(sol)
    # boundaries of the coarse regions L | c1 | c1/c2 | c2 | c1/c2 | c1 | R, merging tie-only flips
    matched = []
    for target in EXAMPLE1_TABLE:
        near = min(bounds, key=lambda b: abs(b - target)) if bounds else float("nan")
        matched.append(abs(near - target) <= 0.01)
    mid = (sol.grid >= 0.088) & (sol.grid <= 0.367)
    gap = np.abs(sol.branch_score(Consult("c1")) - sol.branch_score(Consult("c2")))[mid]
    ok = all(matched) and len(bounds) == len(EXAMPLE1_TABLE) and gap.max() < 1e-4 and elapsed <= 60
    report(1, "Example 1 table", ok,
           f"boundaries={[round(float(b), 4) for b in bounds]} table={list(EXAMPLE1_TABLE)} "
           f"max|c1-c2| in middle band={gap.max():.2e} runtime={elapsed:.2f}s")
    assert ok


def test_criterion_2_example2_large_cost():
    sol = solve_grid(example2(cost=0.3), GridConfig(grid_size=4001))
    consults = [d for d in sol.policy if not d.is_stop]
    err = float(np.max(np.abs(sol.values - np.maximum(sol.grid, 1 - sol.grid))))
    ok = not consults and err < 1e-9
    report(2, "Example 2 at c=0.3 never consults", ok, f"consult points={len(consults)} max err={err:.2e}")
    assert ok


def test_criterion_3_example2_cost_sweep():
    priors = np.linspace(0.001, 0.999, 2001)
    pieces = [piecewise_extract(example2(cost=c), priors=priors) for c in EXAMPLE2_COSTS]
    grids = [solve_grid(example2(cost=c), GridConfig(grid_size=4001)).values for c in EXAMPLE2_COSTS]
    exact_mono = min(float(np.min(a.values - b.values)) for a, b in zip(pieces, pieces[1:]))
    grid_mono = min(float(np.min(a - b)) for a, b in zip(grids, grids[1:]))
    counts = [pw.n_segments for pw in pieces]
    ok = exact_mono >= -1e-9 and grid_mono >= -1e-9 and all(a >= b for a, b in zip(counts, counts[1:]))
    report(3, "Example 2 cost sweep", ok,
           f"segments={counts} min V(c_i)-V(c_i+1): exact={exact_mono:.2e} grid={grid_mono:.2e}")
    assert ok


def test_criterion_4_example4_golden():
    target = Fraction(16, 17) - Fraction(1, 20) * Fraction(50, 17)
    g2 = example4_g2(cost=0.05, exact=True)
    v2 = lattice_value(g2)
    params = three_signal_params(example4_j2(exact=True))
    reduced, c_star = qt_reduce(params, Fraction(1, 20))
    est = Problem(0.5, (estimator(reduced.q, "j"),), c_star)
    v_red = lattice_value(est)
    band = np.linspace(float(G1_BAND[0]), float(G1_BAND[1]), 9)[1:-1]
    g1_err = max(abs(lattice_value(example4_g1(c, exact=True)) - (16 / 17 - 50 * c / 17)) for c in band)
    priors = np.linspace(0.45, 0.55, 21)
    neigh = []
    for g in (example4_g1(0.05, exact=True), g2):
        vals, _, _, _ = prior_sweep(g, detect_rational_ratio(g.consultants), priors)
        neigh.append(vals)
    neigh_err = float(np.max(np.abs(neigh[0] - neigh[1])))
    ok = (abs(v2 - float(target)) < 1e-9 and c_star == Fraction(5, 34) and abs(v_red - v2) < 1e-12
          and g1_err < 1e-9 and neigh_err < 1e-9)
    report(4, "Example 4 golden value", ok,
           f"G2={v2:.13f} target={float(target):.13f} reduced(c*={c_star})={v_red:.13f} "
           f"G1 band [{float(G1_BAND[0]):.5f},{float(G1_BAND[1]):.5f}] max err={g1_err:.1e} "
           f"G1-G2 on 21 priors={neigh_err:.1e}")
    assert ok


def test_criterion_5_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240505)
    worst_grid = worst_lat = 0.0
    n_lattice = n_consult = 0
    for i in range(50):
        pr = oracle_problem(rng, i)
        bf, _ = brute_force_value(pr, 6)
        n_consult += bf > stopping_value(pr.prior, pr.payoffs) + 1e-12
        gv = value_at(solve_grid(pr, GridConfig(grid_size=4001)), pr.prior)
        worst_grid = max(worst_grid, abs(bf - gv))
        spec = detect_rational_ratio(pr.consultants)
        if spec is not None:
            try:
                lv = lattice_value(pr, spec)
            except LatticeTooLarge:
                continue
            n_lattice += 1
            worst_lat = max(worst_lat, abs(bf - lv))
    elapsed = time.perf_counter() - t0
    ok = worst_grid < 1e-3 and worst_lat < 1e-9 and elapsed <= 300
    report(5, "brute-force oracle equivalence", ok,
           f"50 problems ({n_consult} consult, {n_lattice} lattice) max|bf-grid|={worst_grid:.1e} "
           f"max|bf-lattice|={worst_lat:.1e} runtime={elapsed:.1f}s")
    assert ok


def test_criterion_6_value_properties():
    n_grid = 2001
    rng = np.random.default_rng(61)
    fails = {"martingale": 0, "convexity": 0, "monotone_c": 0, "boundary": 0, "thresholds": 0}
    worst_mart = 0.0
    n_consult = 0
    for _ in range(200):
        pr = property_problem(rng, n_grid)
        for p in rng.uniform(0, 1, 5):
            for j in pr.consultants:
                total = 0.0
                for s in j.signals:
                    w = signal_prob(p, j, s)
                    if w > 0:
                        total += w * posterior(p, j, s)
                worst_mart = max(worst_mart, abs(total - p))
        sol = solve_grid(pr, GridConfig(grid_size=n_grid))
        v = sol.values
        if worst_mart > 1e-12:
            fails["martingale"] += 1
        if np.min(v[:-2] - 2 * v[1:-1] + v[2:]) < -1e-6:
            fails["convexity"] += 1
        higher = solve_grid(pr.replace(cost=pr.cost + 0.01), GridConfig(grid_size=n_grid))
        if np.min(v - higher.values) < -1e-9:
            fails["monotone_c"] += 1
        if v[0] != pr.payoffs.u_Ll or v[-1] != pr.payoffs.u_Rr:
            fails["boundary"] += 1
        th = thresholds(sol)
        if any(not d.is_stop for d in sol.policy):
            n_consult += 1
            if not (th.p_L >= pr.cost - 1e-15 and th.p_R <= 1 - pr.cost + 1e-15):
                fails["thresholds"] += 1
        else:
            # no consultation region: the stopping regions meet at the stop crossover
            u = pr.payoffs
            cross = u.u_Ll / (u.u_Rr + u.u_Ll)
            if not (th.p_L <= cross <= th.p_R and th.p_R - th.p_L <= 1.0 / (n_grid - 1) + 1e-15):
                fails["thresholds"] += 1
    ok = not any(fails.values())
    report(6, "belief-value property suite", ok,
           f"200 problems ({n_consult} with a consultation region), failures={fails}, "
           f"max martingale err={worst_mart:.1e}")
    assert ok


def test_criterion_7_revealer_usage():
    rng = np.random.default_rng(7)
    bad = []
    Cs = []
    for i in range(20):
        pr, j_star = revealer_instance(rng)
        analysis = revealing_cost_threshold(pr, j_star)
        Cs.append(analysis.C)
        used = verify_revealer_usage(pr, j_star, [analysis.C * f for f in (0.1, 0.5, 0.9)])
        if not (analysis.C > 0 and all(used.values())):
            bad.append(i)
    ok = not bad
    report(7, "revealing consultant usage", ok,
           f"20 instances, C range=[{min(Cs):.2e},{max(Cs):.2e}], failing instances={bad}")
    assert ok


def test_criterion_8_piecewise_linearity():
    pair = Problem(0.5, (example4_j1(exact=True), example4_j2(exact=True)), 0.05)
    pw = piecewise_extract(pair, priors=np.linspace(0.001, 0.999, 2001))
    fine = piecewise_extract(pair, priors=np.linspace(0.001, 0.999, 4001))
    ok = pw.n_segments < 200 and pw.max_residual < 1e-8 and fine.n_segments == pw.n_segments
    report(8, "piecewise linearity on the lattice", ok,
           f"segments={pw.n_segments} (4001 priors: {fine.n_segments}) max residual={pw.max_residual:.1e}")
    assert ok


def test_criterion_9_strict_convexity():
    j = example3_consultant(0.8, 0.4)
    spec = detect_rational_ratio([j])
    sol = solve_grid(Problem(0.5, (j,), 0.02), GridConfig(grid_size=4001))
    th = thresholds(sol)
    g, v = sol.grid, sol.values
    step = 40  # triples (p - 0.01, p, p + 0.01)
    idx = np.flatnonzero((g >= th.p_L + 0.05) & (g <= th.p_R - 0.05))
    idx = idx[(idx >= step) & (idx + step < len(g))]
    d2 = v[idx - step] - 2 * v[idx] + v[idx + step]
    frac = float(np.mean(d2 > 1e-7))
    ok = spec is None and frac >= 0.9
    report(9, "strict convexity for an irrational ratio", ok,
           f"rational ratio={'absent' if spec is None else spec.Q} p_L={th.p_L:.4f} p_R={th.p_R:.4f} "
           f"triples={len(idx)} spacing=0.01 fraction>1e-7={frac:.3f}")
    assert ok


def test_criterion_10_simulation():
    cases = []
    ex2 = example2(prior=0.5, cost=0.3)
    cases.append(("Example 2 c=0.3", ex2, solve_grid(ex2, GridConfig(grid_size=4001))))
    g2 = example4_g2(cost=0.05, exact=True)
    cases.append(("G2 c=0.05", g2, solve_lattice(g2)))
    g1 = example4_g1(0.05, exact=True)
    cases.append(("G1 c=0.05", g1, solve_lattice(g1)))
    details, ok = [], True
    for name, pr, sol in cases:
        rep = simulate_policy(pr, sol, runs=100_000, seed=12345)
        again = simulate_policy(pr, sol, runs=100_000, seed=12345)
        target = value_at(sol, pr.prior)
        z = abs(rep.mean_payoff - target)
        resid = decomposition_check(rep, pr)
        this = z <= 3 * rep.std_error and resid < 1e-12 and rep == again
        ok &= this
        details.append(f"{name}: mean={rep.mean_payoff:.5f} V={target:.5f} se={rep.std_error:.1e} "
                       f"resid={resid:.0e} identical={rep == again}")
    report(10, "simulation cross-check", ok, "; ".join(details))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
