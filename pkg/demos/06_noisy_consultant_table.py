"""
An estimator against a noisy three-signal consultant
====================================================

Consultant 1 is an 0.8 estimator. Consultant 2 reports the state with
probability 0.625, the wrong state with probability 0.035 and stays silent
otherwise. The reference table for c = 0.01 places consultant 2 in a narrow
band between 0.088 and 0.367 (and its mirror image); this script shows where
the solver actually puts the switches.
"""

import numpy as np

from consultant_dp import GridConfig, brute_force_value, solve_grid
from consultant_dp.presets import example1

problem = example1(cost=0.01)
sol = solve_grid(problem, GridConfig(grid_size=4001))
prev = None
print("switch points of the tie-broken policy:")
for p, d, ties in zip(sol.grid, sol.policy, sol.ties):
    if d != prev:
        print(f"  p={p:.5f}  {d}  ties={'|'.join(map(str, ties))}")
        prev = d

# Score both consultants directly at a belief inside the reference band.
i = sol.index_of(0.2)
for b, s in zip(sol.branches, sol.scores[:, i]):
    print(f"  at p=0.2, {b}: {s:.6f}")

# The brute-force oracle agrees that consultant 2 comes first at 0.2.
for h in (2, 4, 6):
    print(f"  horizon {h}: first decisions {brute_force_value(problem.replace(prior=0.2), h)[1]}")

# Sweep the cost to see whether any cost reproduces the reference cut-offs.
for c in (0.005, 0.01, 0.02, 0.04, 0.08):
    s = solve_grid(problem.replace(cost=c), GridConfig(grid_size=2001))
    c2 = np.array([str(d) == "consult:c2" for d in s.policy])
    band = f"[{s.grid[c2].min():.4f}, {s.grid[c2].max():.4f}]" if c2.any() else "nowhere"
    print(f"  c={c:.3f}: consultant 2 used on {band}")
