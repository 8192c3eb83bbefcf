"""Structural results: revealing consultants, three-signal reductions and a brute-force oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.special import expit

from .grid_solver import TIE_TOL, GridConfig, Solution, solve_grid
from .lattice_solver import LatticeTooLarge, build_lattice, consult_band, detect_rational_ratio, solve_lattice
from .model import STOP_L, STOP_R, Consult, Consultant, Decision, Problem, logit, posterior
from .presets import THREE

BAND_TOL = 1e-7
MAX_HORIZON = 8
MAX_CONSULTANTS = 3
MAX_SIGNALS = 4


# --------------------------------------------------------------------------
# Brute-force oracle
# --------------------------------------------------------------------------

def brute_force_value(problem: Problem, horizon: int, tie_tol: float = TIE_TOL):
    """Expectimax over every strategy that consults at most ``horizon`` times.

    Works with unnormalised joint weights ``(P(r, h), P(l, h))`` of a history
    ``h``, so no posterior is ever formed. The result is a lower bound on the
    value; it is exact when some optimal strategy never needs more than
    ``horizon`` consultations. Returns ``(value, first_decisions)``.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if horizon > MAX_HORIZON or len(problem.consultants) > MAX_CONSULTANTS or \
            any(len(j.signals) > MAX_SIGNALS for j in problem.consultants):
        raise ValueError(f"brute force limited to horizon <= {MAX_HORIZON}, "
                         f"{MAX_CONSULTANTS} consultants, {MAX_SIGNALS} signals")
    u, c = problem.payoffs, float(problem.cost)
    rows = [([float(x) for x in j.probs_r], [float(x) for x in j.probs_l]) for j in problem.consultants]
    memo: dict = {}

    def value(wr: float, wl: float, depth: int) -> float:
        key = (wr, wl, depth)
        if key in memo:
            return memo[key]
        best = max(wr * u.u_Rr, wl * u.u_Ll)
        if depth > 0:
            for sr, sl in rows:
                total = -c * (wr + wl)
                for a, b in zip(sr, sl):
                    if a * wr + b * wl > 0:
                        total += value(wr * a, wl * b, depth - 1)
                best = max(best, total)
        memo[key] = best
        return best

    p = float(problem.prior)
    scores = {STOP_R: p * u.u_Rr, STOP_L: (1 - p) * u.u_Ll}
    if horizon > 0:
        for j, (sr, sl) in zip(problem.consultants, rows):
            total = -c
            for a, b in zip(sr, sl):
                if a * p + b * (1 - p) > 0:
                    total += value(p * a, (1 - p) * b, horizon - 1)
            scores[Consult(j.id)] = total
    best = max(scores.values())
    return best, {d for d, v in scores.items() if v >= best - tie_tol}


# --------------------------------------------------------------------------
# Revealing consultants
# --------------------------------------------------------------------------

def revelation_probability(j: Consultant) -> float:
    """Smallest, over the two states, probability that ``j`` reveals the state."""
    eps = []
    for state in ("r", "l"):
        sig = j.revealing_signals(state)
        eps.append(float(sum(j.likelihood(s, state) for s in sig)))
    return min(eps)


@dataclass(frozen=True)
class RevealerBound:
    """Guaranteed payoff ``full_info - c/epsilon`` of consulting until revelation."""

    epsilon: float
    full_info: float

    def __call__(self, c):
        return self.full_info - np.asarray(c) / self.epsilon if np.ndim(c) else self.full_info - c / self.epsilon


def revealer_lower_bound(problem: Problem, j_star: Consultant) -> RevealerBound:
    eps = revelation_probability(j_star)
    if eps <= 0:
        raise ValueError(f"consultant {j_star.id!r} is not revealing in both states")
    u, p = problem.payoffs, float(problem.prior)
    return RevealerBound(eps, p * u.u_Rr + (1 - p) * u.u_Ll)


def max_state_posterior(consultants: Iterable[Consultant]) -> float:
    """Largest ``q(w|s,j)`` (posterior from a uniform prior) over signals and states.

    Returns 0.5 for an empty or uninformative set.
    """
    q = 0.5
    for j in consultants:
        for a, b in zip(j.probs_r, j.probs_l):
            a, b = float(a), float(b)
            if a + b > 0:
                q = max(q, a / (a + b), b / (a + b))
    return q


def _posterior_bounds(p0: float, q: float, n: np.ndarray):
    """Extreme beliefs after ``n`` signals whose likelihood ratio is at most ``q/(1-q)``.

    Returns ``(lo, hi, 1 - hi)``; the complement is computed directly so it
    does not cancel to zero near certainty.
    """
    x0 = logit(p0)
    step = math.log(q) - math.log1p(-q) if q > 0.5 else 0.0
    return expit(x0 - n * step), expit(x0 + n * step), expit(-(x0 + n * step))


def nonreveal_upper_bound(problem: Problem, J_minus: Iterable[Consultant], c: float,
                          form: str = "sound") -> float:
    """Bound on the payoff of strategies that consult only ``J_minus``.

    ``form="literal"`` evaluates, for n = 0..ceil(u_max/c),

        max( p0*u_Rr*hi_n - c*n, (1-p0)*u_Ll*(1 - lo_n) - c*n )

    and takes the largest, where ``hi_n``/``lo_n`` are the extreme beliefs
    after n signals. This expression is not a true upper bound (at n = 0 it
    is below the stopping value).

    ``form="sound"`` returns ``full_info - min_n(m_n + c*n)`` with
    ``m_n = min(lo_n*u_Rr, (1-hi_n)*u_Ll)``, the smallest possible expected
    loss from acting on a belief in ``[lo_n, hi_n]``. It follows from the
    martingale property of beliefs and is a valid bound.
    """
    J_minus = list(J_minus)
    if any(j.revealing_signals("r") or j.revealing_signals("l") for j in J_minus):
        raise ValueError("J_minus contains a consultant with a revealing signal")
    if not c > 0:
        raise ValueError("cost must be positive")
    u, p0 = problem.payoffs, float(problem.prior)
    q = max_state_posterior(J_minus)
    if q >= 1:
        raise ValueError("J_minus reveals the state")
    n_cap = math.ceil(u.max / c)
    step = math.log(q) - math.log1p(-q) if q > 0.5 else 0.0
    x0 = logit(p0)

    if form == "literal":
        stake_r, stake_l = p0 * u.u_Rr, (1 - p0) * u.u_Ll
        n_stop = 0
        for stake in (stake_r, stake_l):
            # past this n the stake can gain less than c in total
            if stake > c and step > 0:
                n_stop = max(n_stop, math.ceil((-logit(c / stake) + abs(x0)) / step) + 1)
        n = np.arange(min(n_cap, n_stop) + 1)
        lo, hi, _ = _posterior_bounds(p0, q, n)
        terms = np.maximum(stake_r * hi, stake_l * (1 - lo)) - c * n
        return float(terms.max())
    if form == "sound":
        full = p0 * u.u_Rr + (1 - p0) * u.u_Ll
        m_min = min(u.u_Rr, u.u_Ll)
        n_stop = 0
        if step > 0 and m_min > 0 and c < m_min:
            # past this n the residual loss m_n is below c
            n_stop = math.ceil((-logit(c / m_min) + abs(x0)) / step) + 1
        n = np.arange(min(n_cap, n_stop) + 1)
        lo, _, hi_c = _posterior_bounds(p0, q, n)
        loss = np.minimum(lo * u.u_Rr, hi_c * u.u_Ll) + c * n
        return float(full - loss.min())
    raise ValueError(f"unknown form {form!r}")


@dataclass
class RevealerAnalysis:
    epsilon: float
    sigma_star_payoff: RevealerBound
    nonreveal_bound: Callable[[float], float]
    C: float
    form: str
    q: float


def _split(problem: Problem, j_star: Consultant, J_minus):
    if J_minus is None:
        J_minus = [j for j in problem.consultants if j.id != j_star.id]
    return list(J_minus)


def revealing_cost_threshold(problem: Problem, j_star: Consultant, J_minus=None,
                             form: str = "sound", tol: float = 1e-9) -> RevealerAnalysis:
    """Largest cost below which consulting until revelation beats every ``J_minus``-only strategy.

    Bisects on ``nonreveal_upper_bound(c) - revealer_lower_bound(c)``, which is
    convex in ``c``, so the set where it is nonpositive is an interval
    starting at 0. Costs are searched in ``(0, max(u)]``.
    """
    J_minus = _split(problem, j_star, J_minus)
    lower = revealer_lower_bound(problem, j_star)
    p0 = float(problem.prior)
    if not 0 < p0 < 1:
        raise ValueError("the threshold is only positive for interior priors")

    def bound(c):
        return nonreveal_upper_bound(problem, J_minus, c, form)

    def gap(c):
        return bound(c) - lower(c)

    hi = problem.payoffs.max
    if gap(hi) <= 0:
        C = hi
    else:
        lo = hi
        while gap(lo) > 0:
            lo /= 2
            if lo < 1e-300:
                raise ArithmeticError("no cost with a positive revealer advantage found")
        while hi - lo > tol * max(lo, 1e-300) and hi - lo > 1e-15:
            mid = 0.5 * (lo + hi)
            if gap(mid) <= 0:
                lo = mid
            else:
                hi = mid
        C = lo
    return RevealerAnalysis(lower.epsilon, lower, bound, C, form, max_state_posterior(J_minus))


# --------------------------------------------------------------------------
# Solving helpers shared by the verifiers
# --------------------------------------------------------------------------

def solve_auto(problem: Problem, grid: GridConfig | None = None, tie_tol: float | None = None) -> Solution:
    """Lattice solve when the consultants have a rational ratio and the lattice is tractable, grid otherwise."""
    if tie_tol is None:
        tie_tol = min(TIE_TOL, 1e-4 * problem.cost)
    spec = detect_rational_ratio(problem.consultants)
    if spec is not None:
        try:
            return solve_lattice(problem, build_lattice(problem, spec), tie_tol=tie_tol)
        except LatticeTooLarge:
            pass
    return solve_grid(problem, grid, tie_tol=tie_tol)


def lookup_decision(solution: Solution, p: float):
    """Tie set at belief ``p``; ``None`` if ``p`` is off a lattice table but inside the band."""
    i = solution.index_of(p)
    if solution.kind == "grid" or abs(solution.grid[i] - p) <= 1e-9 * max(1.0, abs(p)):
        return solution.ties[i], solution.policy[i]
    lo, hi = consult_band(solution.problem)
    u = solution.problem.payoffs
    if p < lo or p > hi or p in (0.0, 1.0):
        d = STOP_R if p * u.u_Rr >= (1 - p) * u.u_Ll else STOP_L
        return (d,), d
    raise LookupError(f"belief {p} is not on the solved lattice")


def reachable_decisions(solution: Solution, start: float | None = None,
                        avoid: Iterable[str] = (), max_states: int = 100000) -> set[Decision]:
    """Decisions used at beliefs reachable from ``start`` with positive probability.

    At each belief the decision is the first member of the tie set that does
    not consult a consultant in ``avoid`` (falling back to the tie-broken
    policy when every option is avoided).
    """
    problem = solution.problem
    avoid = set(avoid)
    p = float(problem.prior if start is None else start)
    seen_keys: set = set()
    used: set[Decision] = set()
    stack = [p]
    while stack:
        p = stack.pop()
        key = solution.index_of(p) if solution.kind == "grid" else round(p, 12)
        if key in seen_keys:
            continue
        seen_keys.add(key)
        if len(seen_keys) > max_states:
            raise RuntimeError("reachable set too large")
        ties, chosen = lookup_decision(solution, p)
        pick = next((d for d in ties if d.is_stop or d.consultant not in avoid), chosen)
        used.add(pick)
        if pick.is_stop:
            continue
        j = problem.consultant(pick.consultant).as_float()
        for s, a, b in zip(j.signals, j.probs_r, j.probs_l):
            if p * a + (1 - p) * b > 0:
                q = posterior(p, j, s)
                if q != p:
                    stack.append(q)
    return used


def verify_revealer_usage(problem: Problem, j_star: Consultant, costs: Iterable[float],
                          grid: GridConfig | None = None) -> dict:
    """For each cost, whether the solved policy consults ``j_star`` on some reachable belief."""
    out = {}
    for c in costs:
        sol = solve_auto(problem.replace(cost=c), grid)
        out[c] = Consult(j_star.id) in reachable_decisions(sol)
    return out


# --------------------------------------------------------------------------
# Three-signal consultants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreeSignalParams:
    """Consultant that is silent w.p. ``1-t`` and otherwise matches the state w.p. ``q``."""

    q: float
    t: float

    def __post_init__(self):
        if not 0.5 < self.q <= 1:
            raise ValueError(f"q must lie in (0.5, 1], got {self.q}")
        if not 0 < self.t <= 1:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")


def make_three_signal(params: ThreeSignalParams, cid: str = "j") -> Consultant:
    q, t = params.q, params.t
    match, mismatch, null = q * t, (1 - q) * t, 1 - t
    return Consultant(cid, THREE, (match, mismatch, null), (mismatch, match, null))


def three_signal_params(j: Consultant) -> ThreeSignalParams | None:
    """Recover ``(q, t)`` from a symmetric three-signal consultant, else ``None``."""
    if set(j.signals) != set(THREE):
        return None
    rr, lr, nr = (j.likelihood(s, "r") for s in THREE)
    rl, ll, nl = (j.likelihood(s, "l") for s in THREE)
    if not (math.isclose(rr, ll, abs_tol=1e-12) and math.isclose(lr, rl, abs_tol=1e-12)
            and math.isclose(nr, nl, abs_tol=1e-12)):
        return None
    t = rr + lr
    if t <= 0:
        return None
    q = 1 if lr == 0 else rr / t
    if q <= 0.5:
        return None
    return ThreeSignalParams(q, t)


def qt_reduce(params: ThreeSignalParams, c: float) -> tuple[ThreeSignalParams, float]:
    """A silent report leaves the belief unchanged, so ``(q, t)`` at cost ``c`` acts like ``(q, 1)`` at ``c/t``."""
    if not c > 0:
        raise ValueError("cost must be positive")
    return ThreeSignalParams(params.q, 1), c / params.t


@dataclass(frozen=True)
class RevealerBand:
    lo: float
    hi: float
    symmetric: bool
    contiguous: bool


def revealer_band(solution: Solution, t: float, c: float, band_tol: float = BAND_TOL) -> RevealerBand | None:
    """Interval of table beliefs where the value equals ``1 - c/t``."""
    target = 1 - c / t
    hit = np.abs(solution.values - target) < band_tol
    idx = np.flatnonzero(hit)
    if len(idx) == 0:
        return None
    contiguous = bool(np.all(np.diff(idx) == 1))
    lo, hi = float(solution.grid[idx[0]]), float(solution.grid[idx[-1]])
    spacing = float(np.max(np.diff(solution.grid))) if len(solution.grid) > 1 else 0.0
    symmetric = abs(lo - (1 - hi)) <= spacing + 1e-12
    return RevealerBand(lo, hi, symmetric, contiguous)


@dataclass
class HalfPolicyClass:
    label: str  # "NoConsult", "OnlyRevealer" or "NeverRevealer"
    value: float
    evidence: dict = field(default_factory=dict)


def _revealers(problem: Problem):
    out = []
    for j in problem.consultants:
        params = three_signal_params(j)
        if params is not None and params.q == 1:
            out.append((j, params))
    return out


def classify_half_policy(problem: Problem, grid: GridConfig | None = None,
                         band_tol: float = BAND_TOL) -> HalfPolicyClass:
    """Which of the three optimal-policy shapes holds at prior 1/2.

    NoConsult when the value is 1/2; OnlyRevealer when it equals the best
    revealer's ``1 - c/t``; NeverRevealer otherwise, checked by following a
    tie resolution that avoids revealers and confirming none is reached.
    """
    if float(problem.prior) != 0.5:
        raise ValueError("classification needs prior 1/2")
    u = problem.payoffs
    if not (u.u_Rr == 1 and u.u_Ll == 1):
        raise ValueError("classification needs symmetric unit payoffs")
    if any(three_signal_params(j) is None for j in problem.consultants):
        raise ValueError("all consultants must be symmetric three-signal consultants")
    revealers = _revealers(problem)
    if not revealers:
        raise ValueError("problem has no revealer")
    c = float(problem.cost)
    t_best = max(float(p.t) for _, p in revealers)
    reveal_value = 1 - c / t_best
    if problem.consulting_dominated:
        return HalfPolicyClass("NoConsult", 0.5, {"reason": "cost >= max payoff"})
    sol = solve_auto(problem, grid)
    v = float(np.interp(0.5, sol.grid, sol.values))
    evidence = {"value": v, "revealer_value": reveal_value, "solver": sol.kind,
                "ties_at_half": sol.ties[sol.index_of(0.5)]}
    if abs(v - 0.5) < band_tol:
        return HalfPolicyClass("NoConsult", v, evidence)
    if abs(v - reveal_value) < band_tol:
        return HalfPolicyClass("OnlyRevealer", v, evidence)
    used = reachable_decisions(sol, 0.5, avoid={j.id for j, _ in revealers})
    evidence["reachable"] = used
    evidence["verified"] = not any(d.consultant in {j.id for j, _ in revealers} for d in used)
    return HalfPolicyClass("NeverRevealer", v, evidence)
