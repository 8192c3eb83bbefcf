"""
When is a revealing consultant worth asking?
============================================

A consultant that occasionally reveals the state guarantees the payoff
full_info - c/eps by being asked until it speaks. Consultants that never
reveal can only push the belief a bounded distance per report, so for small
enough costs the revealer must enter every optimal policy. This script
computes that cost threshold and checks it against exact solutions.
"""

from consultant_dp import Problem, estimator
from consultant_dp.presets import example2, three_signal
from consultant_dp.theory import (classify_half_policy, nonreveal_upper_bound, revealer_lower_bound,
                                  revealing_cost_threshold, verify_revealer_usage)

problem = example2(cost=0.01)
est, rev = problem.consultants

lower = revealer_lower_bound(problem, rev)
print(f"eps = {lower.epsilon}, guaranteed payoff at c=0.01: {lower(0.01):.4f}")
for form in ("sound", "literal"):
    print(f"{form:5s} bound on estimator-only play at c=0.01: "
          f"{nonreveal_upper_bound(problem, [est], 0.01, form):.5f}")

# The literal bound falls below the stopping value, so the threshold it gives
# is too generous: at those costs the estimator alone does better.
for form in ("sound", "literal"):
    analysis = revealing_cost_threshold(problem, rev, form=form)
    costs = [analysis.C * k for k in (0.1, 0.5, 0.9)]
    used = verify_revealer_usage(problem, rev, costs)
    print(f"{form:5s} C = {analysis.C:.3e}; revealer used at 0.1C, 0.5C, 0.9C: {list(used.values())}")

# A confident prior with a weak estimator next to the revealer.
j = three_signal("star", 0.05, 0.0, 0.95)
confident = Problem(0.99, (j, estimator(0.6)), 0.01)
analysis = revealing_cost_threshold(confident, j)
print(f"\nprior 0.99: C = {analysis.C:.3e}",
      verify_revealer_usage(confident, j, [analysis.C * k for k in (0.1, 0.5, 0.9)]))

# Which shape does the optimal policy at 1/2 take?
for c in (0.005, 0.02, 0.1, 0.3):
    result = classify_half_policy(example2(cost=c))
    print(f"c={c:5.3f}: {result.label:13s} V(1/2)={result.value:.6f}")
print("revealer alone, c=0.02:", classify_half_policy(Problem(0.5, (rev,), 0.02)).label)
