"""
Counting reports instead of tracking beliefs
============================================

With a single symmetric estimator every belief the investor can hold is
logit(p0) + k*ln(q/(1-q)) for an integer k, the net number of "r" reports. The
optimal policy then reads: keep asking until |k| hits a threshold.

A silent-or-accurate consultant (q = 16/17, t = 17/50) behaves like a q=16/17
estimator whose cost is scaled by 1/t. Its one-step move equals two steps of
the 0.8 estimator, so both problems share the value 16/17 - 50c/17 over a
band of costs.
"""

from fractions import Fraction

import numpy as np

from consultant_dp import Problem, detect_rational_ratio, estimator, lattice_value, prior_sweep, solve_lattice
from consultant_dp.presets import example4_g2
from consultant_dp.theory import ThreeSignalParams, make_three_signal, qt_reduce

g2 = example4_g2(0.05, exact=True)
spec = detect_rational_ratio(g2.consultants)
print(f"log-odds step ln 16 = {spec.Q:.6f}; offsets {spec.offsets}")
sol = solve_lattice(g2)
for p, v, d in zip(sol.grid, sol.values, sol.policy):
    print(f"  p={p:.6f}  V={v:.12f}  {d}")
print("closed form at 1/2:", 16 / 17 - 0.05 * 50 / 17)

# Remove the silence: same q, cost 0.05/t = 5/34.
params, c_star = qt_reduce(ThreeSignalParams(Fraction(16, 17), Fraction(17, 50)), Fraction(1, 20))
reduced = Problem(0.5, (make_three_signal(params, "j"),), c_star)
print("reduced cost", c_star, "value", lattice_value(reduced))

# The 0.8 estimator with threshold 2 has the same value, as long as the cost
# sits where that threshold is optimal.
band = (48 / 2105, 4 / 55)
print(f"\nthreshold-2 band for the 0.8 estimator: [{band[0]:.5f}, {band[1]:.5f}]")
for c in [0.015, 0.025, 0.05, 0.07, 0.08]:
    v = lattice_value(Problem(0.5, (estimator(Fraction(4, 5), "j1"),), c))
    inside = band[0] <= c <= band[1]
    print(f"  c={c:.3f}  V={v:.10f}  16/17-50c/17={16 / 17 - 50 * c / 17:.10f}  in band: {inside}")

# Near prior 1/2 the two problems agree, the shared policy being "stop one
# strong report away".
g1 = Problem(0.5, (estimator(Fraction(4, 5), "j1"),), 0.05)
priors = np.linspace(0.45, 0.55, 5)
v1 = prior_sweep(g1, detect_rational_ratio(g1.consultants), priors)[0]
v2 = prior_sweep(g2, spec, priors)[0]
print("\nprior   V(G1)          V(G2)")
for p, a, b in zip(priors, v1, v2):
    print(f"{p:.3f}  {a:.12f}  {b:.12f}")
