"""Seeded Monte Carlo evaluation of belief policies.

Runs are processed in fixed-size blocks. Block ``b`` draws from its own
Philox stream keyed by ``(seed, b)``, so a report does not depend on how the
blocks are scheduled. Inside a block all runs advance together, one
consultation per step.

The reported mean is stratified by the sampled state:

    mean = p0 * (u_Rr*P_r - c*E_r) + (1-p0) * (u_Ll*P_l - c*E_l)

which makes the bilinear decomposition an identity on every sample rather
than an approximation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid_solver import Solution
from .model import STOP_L, STOP_R, Consult, Decision, Problem, check_problem, expit, logit, posterior

BLOCK_SIZE = 4096

Policy = Callable[[float], Decision]


@dataclass(frozen=True)
class SimulationReport:
    runs: int
    mean_payoff: float
    std_error: float
    P_r: float
    P_l: float
    E_r: float
    E_l: float
    seed: int
    prior: float
    cost: float
    runs_r: int = 0
    runs_l: int = 0
    truncated: int = 0

    @property
    def any_truncated(self) -> bool:
        return self.truncated > 0


@dataclass
class SimulationTrace:
    """One sampled history: the state, every (consultant, signal, posterior) step and the final act."""

    state: str
    steps: list[tuple[str, str, float]] = field(default_factory=list)
    action: str | None = None
    cost_paid: float = 0.0
    truncated: bool = False


# --------------------------------------------------------------------------
# Policies
# --------------------------------------------------------------------------

def _better_stop(p: float, problem: Problem) -> Decision:
    u = problem.payoffs
    return STOP_R if p * u.u_Rr >= (1 - p) * u.u_Ll else STOP_L


def never_consult(problem: Problem) -> Policy:
    return lambda p: _better_stop(p, problem)


def consult_until_reveal(problem: Problem, cid: str) -> Policy:
    """Consult ``cid`` at every interior belief; act once the state is known."""
    def policy(p: float) -> Decision:
        if p in (0.0, 1.0):
            return _better_stop(p, problem)
        return Consult(cid)
    return policy


def solution_policy(solution: Solution) -> Policy:
    """The tie-broken policy of a solved table.

    Grid tables answer with the nearest grid point. Lattice tables answer
    only at lattice beliefs and outside the consultation band; any other
    belief raises :class:`LookupError`.
    """
    from .theory import lookup_decision

    def policy(p: float) -> Decision:
        return lookup_decision(solution, p)[1]
    return policy


def shift_policy(policy: Policy, from_prior: float, to_prior: float) -> Policy:
    """Re-anchor a belief policy at a new prior while keeping its history rule.

    A history moves the log-odds by the same amount whatever the prior, so
    shifting the argument by ``logit(from_prior) - logit(to_prior)`` gives the
    strategy that acts at ``to_prior`` exactly as ``policy`` acts at
    ``from_prior`` after the same signals.
    """
    delta = logit(from_prior) - logit(to_prior)
    if not math.isfinite(delta):
        raise ValueError("both priors must be interior")

    def shifted(p: float) -> Decision:
        if p in (0.0, 1.0):
            return policy(p)
        return policy(expit(logit(p) + delta))
    return shifted


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------

def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


class _Decider:
    """Memoised policy evaluation over arrays of beliefs."""

    def __init__(self, policy: Policy, problem: Problem):
        self.policy = policy
        self.branches = [STOP_R, STOP_L] + [Consult(j.id) for j in problem.consultants]
        self.cache: dict[float, int] = {}

    def __call__(self, beliefs: np.ndarray) -> np.ndarray:
        uniq, inverse = np.unique(beliefs, return_inverse=True)
        codes = np.empty(len(uniq), dtype=int)
        for i, p in enumerate(uniq):
            p = float(p)
            code = self.cache.get(p)
            if code is None:
                d = self.policy(p)
                try:
                    code = self.branches.index(d)
                except ValueError:
                    raise ValueError(f"policy returned unknown decision {d}") from None
                self.cache[p] = code
            codes[i] = code
        return codes[inverse]


def _run_block(problem: Problem, decide: _Decider, n: int, rng: np.random.Generator, max_steps: int):
    """Simulate ``n`` runs; return (is_r, correct, consults, truncated) arrays."""
    p0 = float(problem.prior)
    c_list = [j.as_float() for j in problem.consultants]
    is_r = rng.random(n) < p0
    belief = np.full(n, p0)
    consults = np.zeros(n, dtype=np.int64)
    correct = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    truncated = np.zeros(n, dtype=bool)
    u = problem.payoffs

    for step in range(max_steps + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        codes = decide(belief[idx])
        if step == max_steps:
            # forced stop at the better stopping action
            b = belief[idx]
            forced = codes >= 2
            truncated[idx[forced]] = True
            codes = np.where(forced, np.where(b * u.u_Rr >= (1 - b) * u.u_Ll, 0, 1), codes)
        stop_r = idx[codes == 0]
        stop_l = idx[codes == 1]
        correct[stop_r] = is_r[stop_r]
        correct[stop_l] = ~is_r[stop_l]
        active[stop_r] = False
        active[stop_l] = False
        draws = rng.random(len(idx))
        for k, j in enumerate(c_list):
            sel = codes == k + 2
            if not sel.any():
                continue
            who = idx[sel]
            x = draws[sel]
            rows = np.where(is_r[who][:, None], np.array(j.probs_r)[None, :], np.array(j.probs_l)[None, :])
            cum = np.cumsum(rows, axis=1)
            sig = np.minimum((x[:, None] >= cum).sum(axis=1), len(j.signals) - 1)
            # guard against round-off in the cumulative sums landing on an impossible signal
            sig = np.where(rows[np.arange(len(who)), sig] > 0, sig, rows.argmax(axis=1))
            pr = np.array(j.probs_r)[sig]
            pl = np.array(j.probs_l)[sig]
            b = belief[who]
            a_ = b * pr
            b_ = (1 - b) * pl
            new = np.where(b_ == 0, 1.0, np.where(a_ == 0, 0.0, a_ / np.where(a_ + b_ > 0, a_ + b_, 1.0)))
            belief[who] = new
            consults[who] += 1
    return is_r, correct, consults, truncated


def simulate_policy(problem: Problem, policy: Policy | Solution, runs: int = 100_000, seed: int = 0,
                    max_steps: int | None = None, block_size: int = BLOCK_SIZE,
                    workers: int = 1) -> SimulationReport:
    """Estimate the payoff of a Markov policy by sampling states and signals.

    ``policy`` maps a belief to a :class:`Decision`; a solved table is
    accepted directly. Runs still consulting after ``max_steps`` (default
    ``ceil(50/c)``) stop at the better action and are counted in
    ``truncated``. With ``workers > 1`` blocks run on a thread pool; the
    report is the same as the serial one.
    """
    check_problem(problem)
    if runs < 1:
        raise ValueError("runs must be positive")
    if isinstance(policy, Solution):
        policy = solution_policy(policy)
    if max_steps is None:
        max_steps = math.ceil(50.0 / problem.cost)
    decide = _Decider(policy, problem)
    u, c, p0 = problem.payoffs, float(problem.cost), float(problem.prior)

    # per-state running sums: count, correct, consults, payoff, payoff^2
    acc = {s: np.zeros(5) for s in ("r", "l")}
    n_trunc = 0

    def block_result(block):
        n = min(block_size, runs - block * block_size)
        return _run_block(problem, decide, n, _block_rng(seed, block), max_steps)

    blocks = range(math.ceil(runs / block_size))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(block_result, blocks))
    else:
        results = map(block_result, blocks)
    # accumulate in block order so the floating-point sums do not depend on scheduling
    for is_r, correct, consults, truncated in results:
        n_trunc += int(truncated.sum())
        for s, mask, gain in (("r", is_r, u.u_Rr), ("l", ~is_r, u.u_Ll)):
            pay = gain * correct[mask] - c * consults[mask]
            acc[s] += (mask.sum(), correct[mask].sum(), consults[mask].sum(), pay.sum(), (pay * pay).sum())

    def stats(s):
        n, hit, cons, pay, pay2 = acc[s]
        if n == 0:
            return 0, 0.0, 0.0, 0.0
        mean = pay / n
        var = max(pay2 / n - mean * mean, 0.0)
        return int(n), hit / n, cons / n, var / n

    n_r, P_r, E_r, v_r = stats("r")
    n_l, P_l, E_l, v_l = stats("l")
    mean = p0 * (u.u_Rr * P_r - c * E_r) + (1 - p0) * (u.u_Ll * P_l - c * E_l)
    se = math.sqrt(p0 * p0 * v_r + (1 - p0) ** 2 * v_l)
    return SimulationReport(runs=runs, mean_payoff=float(mean), std_error=float(se),
                            P_r=float(P_r), P_l=float(P_l), E_r=float(E_r), E_l=float(E_l),
                            seed=seed, prior=p0, cost=c, runs_r=n_r, runs_l=n_l, truncated=n_trunc)


def bilinear_payoff(report: SimulationReport, problem: Problem, prior: float | None = None,
                    cost: float | None = None) -> float:
    """``u_Rr*P_r*p0 + u_Ll*P_l*(1-p0) - (E_r*p0 + E_l*(1-p0))*c`` from a report's statistics."""
    u = problem.payoffs
    p0 = float(problem.prior if prior is None else prior)
    c = float(problem.cost if cost is None else cost)
    return (u.u_Rr * report.P_r * p0 + u.u_Ll * report.P_l * (1 - p0)
            - (report.E_r * p0 + report.E_l * (1 - p0)) * c)


def decomposition_check(report: SimulationReport, problem: Problem) -> float:
    return abs(report.mean_payoff - bilinear_payoff(report, problem))


def simulate_trace(problem: Problem, policy: Policy | Solution, rng: np.random.Generator,
                   max_steps: int | None = None) -> SimulationTrace:
    """Sample a single history step by step, recording every posterior."""
    if isinstance(policy, Solution):
        policy = solution_policy(policy)
    if max_steps is None:
        max_steps = math.ceil(50.0 / problem.cost)
    p = float(problem.prior)
    trace = SimulationTrace(state="r" if rng.random() < p else "l")
    for _ in range(max_steps):
        d = policy(p)
        if d.is_stop:
            trace.action = d.kind
            return trace
        j = problem.consultant(d.consultant)
        row = np.array([float(x) for x in (j.probs_r if trace.state == "r" else j.probs_l)])
        s = j.signals[int(rng.choice(len(row), p=row / row.sum()))]
        p = float(posterior(p, j, s))
        trace.steps.append((j.id, s, p))
        trace.cost_paid += problem.cost
    trace.truncated = True
    trace.action = _better_stop(p, problem).kind
    return trace
