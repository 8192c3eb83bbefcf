"""
Checking solved policies by simulation
======================================

Sample states and reports, follow a policy, and compare the average payoff
with the solver's value. The report also carries the per-state hit rates and
consultation counts, which price the same policy at any other prior or cost.
"""

from consultant_dp import Problem, simulate_policy, solve_lattice
from consultant_dp.montecarlo import bilinear_payoff, consult_until_reveal, shift_policy, solution_policy
from consultant_dp.presets import example2_consultants, example4_g2

rev = example2_consultants()[1]
only_rev = Problem(0.5, (rev,), 0.01)
rep = simulate_policy(only_rev, consult_until_reveal(only_rev, "c2"), runs=100_000, seed=1)
print(f"ask the revealer until it speaks: {rep.mean_payoff:.5f} +- {rep.std_error:.5f} (exact 0.8)")
print(f"  mean consultations {rep.E_r:.2f} / {rep.E_l:.2f} (exact 20)")

g2 = example4_g2(0.05, exact=True)
sol = solve_lattice(g2)
rep = simulate_policy(g2, sol, runs=100_000, seed=2)
exact = 16 / 17 - 0.05 * 50 / 17
print(f"\nsolved policy: {rep.mean_payoff:.5f} +- {rep.std_error:.5f} (exact {exact:.6f})")
print(f"  P_r={rep.P_r:.4f} P_l={rep.P_l:.4f} E_r={rep.E_r:.3f} E_l={rep.E_l:.3f}")

# Keep the history rule, move the prior, and compare with the bilinear formula.
policy = shift_policy(solution_policy(sol), 0.5, 0.65)
moved = simulate_policy(g2.replace(prior=0.65), policy, runs=100_000, seed=3)
print(f"\nsame rule from prior 0.65: simulated {moved.mean_payoff:.5f}, "
      f"predicted {bilinear_payoff(rep, g2, prior=0.65):.5f}")
print(f"same rule at c=0.02 (predicted): {bilinear_payoff(rep, g2, cost=0.02):.5f}")

# Reports are reproducible bit for bit.
again = simulate_policy(g2, sol, runs=100_000, seed=2)
print("\nrepeat with the same seed is identical:", again == rep)
