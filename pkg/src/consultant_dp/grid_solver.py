"""Value iteration on a uniform belief grid.

The Bellman operator is

    V(p) = max( p*u_Rr, (1-p)*u_Ll, max_j sum_s P_j(p,s) V(post(p,s,j)) - c )

with off-grid posteriors read by linear interpolation. Iteration starts at
the stopping value, so iterates increase monotonically to the fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import STOP_L, STOP_R, Consult, Decision, Payoffs, Problem, check_problem

TIE_TOL = 1e-9


@dataclass(frozen=True)
class GridConfig:
    grid_size: int = 4001
    tol: float = 1e-10
    max_iters: int | None = None  # None -> ceil(20 / c)

    def __post_init__(self):
        if self.grid_size < 3:
            raise ValueError("grid_size must be >= 3")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def iteration_cap(self, cost: float) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return max(1, math.ceil(20.0 / cost))


@dataclass
class Solution:
    """Value table and Markov policy over a set of beliefs.

    ``scores`` holds the final backed-up value of every branch, rows ordered
    as ``branches`` (StopR, StopL, then consultants in problem order).
    """

    problem: Problem
    grid: np.ndarray
    values: np.ndarray
    policy: list[Decision]
    ties: list[tuple[Decision, ...]]
    scores: np.ndarray
    branches: tuple[Decision, ...]
    iterations: int
    residual: float
    kind: str
    converged: bool = True
    meta: dict = field(default_factory=dict)

    def index_of(self, p: float) -> int:
        """Index of the grid point nearest to ``p``."""
        i = int(np.searchsorted(self.grid, p))
        if i == 0:
            return 0
        if i >= len(self.grid):
            return len(self.grid) - 1
        return i if self.grid[i] - p < p - self.grid[i - 1] else i - 1

    def decision_at(self, p: float) -> Decision:
        return self.policy[self.index_of(p)]

    def branch_score(self, decision: Decision) -> np.ndarray:
        return self.scores[self.branches.index(decision)]


@dataclass(frozen=True)
class Thresholds:
    p_L: float
    p_R: float


def branches_for(problem: Problem) -> tuple[Decision, ...]:
    return (STOP_R, STOP_L) + tuple(Consult(j.id) for j in problem.consultants)


def stopping_value(p, payoffs: Payoffs):
    """``max(p*u_Rr, (1-p)*u_Ll)``; vectorised over arrays."""
    if isinstance(p, np.ndarray):
        return np.maximum(p * payoffs.u_Rr, (1 - p) * payoffs.u_Ll)
    return max(p * payoffs.u_Rr, (1 - p) * payoffs.u_Ll)


def resolve_ties(scores: np.ndarray, branches, tie_tol: float = TIE_TOL):
    """Pick one decision per column and return it with the full tie set.

    Branch order is the preference order, so stopping wins exact ties and
    StopR wins a stop-stop tie.
    """
    best = scores.max(axis=0)
    within = scores >= best - tie_tol
    first = within.argmax(axis=0)
    policy = [branches[k] for k in first]
    ties = [tuple(branches[k] for k in np.flatnonzero(within[:, i])) for i in range(scores.shape[1])]
    return policy, ties


class _Transitions:
    """Posterior probabilities and interpolation weights for every branch."""

    def __init__(self, problem: Problem, beliefs: np.ndarray, grid: np.ndarray):
        self.terms = []  # per consultant: list of (prob, lo_idx, w)
        n = len(grid) - 1
        for j in problem.consultants:
            jf = j.as_float()
            terms = []
            for sr, sl in zip(jf.probs_r, jf.probs_l):
                if sr == 0 and sl == 0:
                    continue
                a = beliefs * sr
                b = (1 - beliefs) * sl
                prob = a + b
                with np.errstate(invalid="ignore", divide="ignore"):
                    post = np.where(prob > 0, a / np.where(prob > 0, prob, 1.0), beliefs)
                if sl == 0:
                    post = np.where(prob > 0, 1.0, post)
                if sr == 0:
                    post = np.where(prob > 0, 0.0, post)
                x = post * n
                lo = np.clip(np.floor(x).astype(np.int64), 0, n - 1)
                w = x - lo
                terms.append((prob, lo, w))
            self.terms.append(terms)

    def continuation(self, values: np.ndarray) -> list[np.ndarray]:
        out = []
        for terms in self.terms:
            acc = np.zeros_like(terms[0][0]) if terms else 0.0
            for prob, lo, w in terms:
                acc = acc + prob * (values[lo] * (1 - w) + values[lo + 1] * w)
            out.append(acc)
        return out


def _backup_scores(problem: Problem, beliefs: np.ndarray, trans: _Transitions, values: np.ndarray) -> np.ndarray:
    u = problem.payoffs
    rows = [beliefs * u.u_Rr, (1 - beliefs) * u.u_Ll]
    rows += [cont - float(problem.cost) for cont in trans.continuation(values)]
    return np.vstack(rows)


def bellman_backup(values: np.ndarray, problem: Problem, p: float, tie_tol: float = TIE_TOL):
    """One application of the Bellman operator at belief ``p``.

    ``values`` is a table on the uniform grid ``linspace(0, 1, len(values))``.
    Returns ``(value, ties)`` where ``ties`` lists every branch within
    ``tie_tol`` of the maximum, in preference order.
    """
    values = np.asarray(values, dtype=float)
    grid = np.linspace(0.0, 1.0, len(values))
    beliefs = np.array([float(p)])
    scores = _backup_scores(problem, beliefs, _Transitions(problem, beliefs, grid), values)
    _, ties = resolve_ties(scores, branches_for(problem), tie_tol)
    return float(scores[:, 0].max()), set(ties[0])


def solve_grid(problem: Problem, cfg: GridConfig | None = None, tie_tol: float = TIE_TOL,
               record_history: bool = False) -> Solution:
    """Approximate the value function on ``cfg.grid_size`` equally spaced beliefs.

    Iterates until the sup-norm change drops below ``cfg.tol``. If the cap is
    hit first the solution is returned with ``converged=False``.
    """
    check_problem(problem)
    cfg = cfg or GridConfig()
    grid = np.linspace(0.0, 1.0, cfg.grid_size)
    u = problem.payoffs
    branches = branches_for(problem)
    values = stopping_value(grid, u)
    history = [values.copy()] if record_history else None

    if problem.consulting_dominated:
        scores = np.vstack([grid * u.u_Rr, (1 - grid) * u.u_Ll]
                           + [np.full_like(grid, -np.inf)] * len(problem.consultants))
        policy, ties = resolve_ties(scores, branches, tie_tol)
        return Solution(problem, grid, values, policy, ties, scores, branches,
                        iterations=0, residual=0.0, kind="grid",
                        meta={"history": history} if record_history else {})

    trans = _Transitions(problem, grid, grid)
    cap = cfg.iteration_cap(float(problem.cost))
    residual = math.inf
    it = 0
    while it < cap:
        scores = _backup_scores(problem, grid, trans, values)
        new = scores.max(axis=0)
        residual = float(np.max(np.abs(new - values)))
        values = new
        it += 1
        if record_history:
            history.append(values.copy())
        if residual < cfg.tol:
            break
    scores = _backup_scores(problem, grid, trans, values)
    policy, ties = resolve_ties(scores, branches, tie_tol)
    meta = {"grid_size": cfg.grid_size, "tol": cfg.tol}
    if record_history:
        meta["history"] = history
    return Solution(problem, grid, values, policy, ties, scores, branches,
                    iterations=it, residual=residual, kind="grid",
                    converged=residual < cfg.tol, meta=meta)


def value_at(solution: Solution, p) -> float | np.ndarray:
    """Linear interpolation of the value table; exact at table points."""
    out = np.interp(p, solution.grid, solution.values)
    return float(out) if np.ndim(out) == 0 else out


def thresholds(solution: Solution) -> Thresholds:
    """Extent of the stopping regions.

    ``p_L`` is the largest point such that StopL is optimal at it and at every
    point below; ``p_R`` is the smallest point with StopR optimal at it and
    everywhere above.
    """
    has_l = np.array([STOP_L in t for t in solution.ties])
    has_r = np.array([STOP_R in t for t in solution.ties])
    grid = solution.grid
    if not has_l[0]:
        p_L = grid[0]
    else:
        stop = np.flatnonzero(~has_l)
        p_L = grid[stop[0] - 1] if len(stop) else grid[-1]
    if not has_r[-1]:
        p_R = grid[-1]
    else:
        stop = np.flatnonzero(~has_r)
        p_R = grid[stop[-1] + 1] if len(stop) else grid[0]
    return Thresholds(float(p_L), float(p_R))
