"""
Value curves and the cost of advice
===================================

Solve the estimator-plus-revealer problem on a belief grid for several
consultation costs. Cheaper advice lifts the whole curve, and the exact
lattice solver shows how the curve breaks into more linear pieces as the
cost falls.
"""

import numpy as np

from consultant_dp import GridConfig, piecewise_extract, solve_grid, thresholds, value_at
from consultant_dp.presets import example2

costs = [0.02, 0.05, 0.1, 0.2, 0.3]
probe = np.array([0.1, 0.3, 0.5, 0.7, 0.9])

print("cost   p_L     p_R    " + "  ".join(f"V({p:.1f})" for p in probe) + "  pieces")
for c in costs:
    problem = example2(cost=c)
    sol = solve_grid(problem, GridConfig(grid_size=2001))
    th = thresholds(sol)
    pieces = piecewise_extract(problem).n_segments
    vals = "  ".join(f"{v:6.4f}" for v in value_at(sol, probe))
    print(f"{c:4.2f}  {th.p_L:6.4f}  {th.p_R:6.4f}  {vals}  {pieces:5d}")

# At c = 0.3 advice never pays: the value is the stopping envelope max(p, 1-p).
sol = solve_grid(example2(cost=0.3), GridConfig(grid_size=2001))
print("\nmax gap to stopping value at c=0.3:", np.max(np.abs(sol.values - np.maximum(sol.grid, 1 - sol.grid))))

# At c = 0.1 the estimator is consulted between the thresholds and the
# revealer never appears in the policy.
sol = solve_grid(example2(cost=0.1), GridConfig(grid_size=2001))
print("decisions used at c=0.1:", sorted({str(d) for d in sol.policy}))
