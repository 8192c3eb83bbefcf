"""
Belief updates with consultants
===============================

A consultant is a pair of likelihood rows, one per state. Reporting a signal
moves the belief by Bayes' rule, and in log-odds every signal is just a fixed
shift. This script walks through both views.
"""

import numpy as np

from consultant_dp.model import estimator, log_odds_update, logit, posterior, posterior_after_repeats
from consultant_dp.presets import example2_consultants

est, rev = example2_consultants()

# An estimator that is right 80% of the time. One "r" report from a fifty-fifty
# belief lands on 0.8, a second one on 16/17.
p = 0.5
for step in range(3):
    p = posterior(p, est, "r")
    print(f"after {step + 1} r-report(s): belief {p:.6f}")

# The same numbers in log-odds: each report adds ln 4.
print("log-odds steps:", np.diff([logit(posterior_after_repeats(0.5, est, "r", n)) for n in range(4)]))

# Opposite reports cancel, whatever the order.
p = 0.5
for s in "rrlrl":
    p = posterior(p, est, s)
print("net count +1 gives", p)

# A revealer is mostly silent. Silence leaves the belief alone, and a report
# settles the state for good.
print("silent revealer:", posterior(0.3, rev, "null"))
print("revealing report:", posterior(0.3, rev, "r"), posterior(0.3, rev, "l"))

# Adding the log-likelihood ratio gives the same posterior as the direct rule.
weak = estimator(2 / 3)
print("2/3 estimator saying l at 0.3:", log_odds_update(0.3, weak, "l"), posterior(0.3, weak, "l"))
