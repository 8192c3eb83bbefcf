"""Exact dynamic programming for consultant sets with a rational ratio.

When every finite log-likelihood ratio is an integer multiple of a common
step ``Q``, beliefs reachable from a prior ``p0`` all have log-odds
``logit(p0) + k*Q``. Only indices inside the band ``[c/u_Rr, 1 - c/u_Ll]`` can
be worth consulting at, so the reachable state set is finite and the Bellman
equation is solved exactly on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import expit
from sympy import factorint

from .grid_solver import TIE_TOL, Solution, branches_for, resolve_ties, stopping_value
from .model import STOP_L, STOP_R, Consultant, Decision, Problem, check_problem, logit

MAX_DENOMINATOR = 10**6
# Float detection accepts a rational approximation only at round-off level;
# anything looser lets irrational ratios through via their convergents.
DETECT_RTOL = 1e-13
OFFSET_RTOL = 1e-9
LATTICE_TOL = 1e-13
MAX_LATTICE_WIDTH = 200_000
DENSE_WIDTH = 64  # policy evaluation switches to sparse solves above this width


class LatticeTooLarge(ValueError):
    """The consultation band holds more lattice points than can be solved."""


@dataclass(frozen=True)
class LatticeSpec:
    """Common log-odds step and the integer offset of every signal.

    ``offsets`` maps ``(consultant id, signal)`` to ``k`` with
    ``ln(S(s|r)/S(s|l)) = k*Q``. Revealing signals are listed in
    ``absorbing`` with the state they reveal; impossible signals are omitted.
    """

    Q: float
    offsets: dict
    absorbing: dict = field(default_factory=dict)
    exact: bool = False

    def kind(self, cid: str, s: str):
        if (cid, s) in self.offsets:
            return self.offsets[(cid, s)]
        return self.absorbing.get((cid, s))


@dataclass(frozen=True)
class Lattice:
    """Band of lattice indices ``k_min..k_max`` around the prior's log-odds."""

    problem: Problem
    spec: LatticeSpec
    base: float
    k_min: int
    k_max: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def beliefs(self) -> np.ndarray:
        return expit(self.base + self.indices * self.spec.Q)

    @property
    def empty(self) -> bool:
        return self.k_max < self.k_min

    def belief(self, k: int) -> float:
        return float(expit(self.base + k * self.spec.Q))


@dataclass
class PiecewiseLinear:
    """Value as a function of the prior, one affine piece per segment.

    On segment ``i`` the value is ``intercepts[i] + slopes[i] * p`` for priors
    in ``[starts[i], ends[i]]`` (sample points). ``breakpoints`` are the
    intersections of consecutive pieces.
    """

    priors: np.ndarray
    values: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    breakpoints: np.ndarray
    max_residual: float

    @property
    def n_segments(self) -> int:
        return len(self.slopes)

    def __call__(self, p):
        idx = np.clip(np.searchsorted(self.breakpoints, p), 0, self.n_segments - 1)
        return self.intercepts[idx] + self.slopes[idx] * p


def _signal_table(consultants):
    """Classify each (consultant, signal) as finite, revealing or impossible."""
    finite, absorbing = {}, {}
    for j in consultants:
        for s, a, b in zip(j.signals, j.probs_r, j.probs_l):
            if a == 0 and b == 0:
                continue
            if b == 0:
                absorbing[(j.id, s)] = "r"
            elif a == 0:
                absorbing[(j.id, s)] = "l"
            else:
                finite[(j.id, s)] = (a, b)
    return finite, absorbing


def _detect_exact(finite: dict):
    """Exact detection for rational likelihoods via prime exponent vectors."""
    vectors = {}
    for key, (a, b) in finite.items():
        ratio = Fraction(a) / Fraction(b)
        v = dict(factorint(ratio.numerator))
        for prime, e in factorint(ratio.denominator).items():
            v[prime] = v.get(prime, 0) - e
        vectors[key] = {p: e for p, e in v.items() if e}
    nonzero = [v for v in vectors.values() if v]
    if not nonzero:
        return 1.0, {k: 0 for k in finite}
    primes = sorted(set().union(*nonzero))
    ref = nonzero[0]
    g = reduce(math.gcd, (abs(e) for e in ref.values()))
    direction = {p: ref.get(p, 0) // g for p in primes}
    multiples = {}
    for key, v in vectors.items():
        # v must equal m * direction for an integer m
        m = None
        for p in primes:
            d, e = direction[p], v.get(p, 0)
            if d == 0:
                if e != 0:
                    return None
                continue
            if e % d:
                return None
            if m is None:
                m = e // d
            elif m != e // d:
                return None
        multiples[key] = m or 0
    g = reduce(math.gcd, (abs(m) for m in multiples.values() if m))
    base = Fraction(1)
    for p, d in direction.items():
        base *= Fraction(p) ** d
    Q = g * math.log(base)
    offsets = {k: m // g for k, m in multiples.items()}
    if Q < 0:
        Q, offsets = -Q, {k: -m for k, m in offsets.items()}
    return Q, offsets


def _detect_float(finite: dict, max_denominator: int, rtol: float):
    logs = {k: math.log(a) - math.log(b) for k, (a, b) in finite.items()}
    nz = {k: x for k, x in logs.items() if abs(x) > 0}
    if not nz:
        return 1.0, {k: 0 for k in finite}
    ref_key = min(nz, key=lambda k: abs(nz[k]))
    ref = nz[ref_key]
    fracs = {}
    for k, x in nz.items():
        f = Fraction(x / ref).limit_denominator(max_denominator)
        if abs(x - float(f) * ref) > rtol * abs(x):
            return None
        fracs[k] = f
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs.values()), 1)
    if lcm > max_denominator:
        # each ratio is rational but the common step would be finer than allowed
        return None
    ints = {k: int(f * lcm) for k, f in fracs.items()}
    g = reduce(math.gcd, (abs(m) for m in ints.values()))
    Q = abs(ref) * g / lcm
    sign = 1 if ref > 0 else -1
    offsets = {k: sign * ints.get(k, 0) // g for k in logs}
    for k, x in nz.items():
        if abs(offsets[k] * Q - x) > OFFSET_RTOL * abs(x):
            return None
    return Q, offsets


def detect_rational_ratio(consultants, max_denominator: int = MAX_DENOMINATOR,
                          rtol: float = DETECT_RTOL) -> LatticeSpec | None:
    """Find the maximal common log-odds step ``Q`` of a consultant set.

    Exact (``Fraction``) likelihoods are decided symbolically. Float
    likelihoods are matched by continued-fraction approximation of the pairwise
    ratios with denominators up to ``max_denominator``. Returns ``None`` if no
    common step exists. Sets without any finite informative signal (pure
    revealers) get the placeholder step ``Q = 1`` with all offsets zero.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    consultants = list(consultants)
    finite, absorbing = _signal_table(consultants)
    exact = bool(consultants) and all(j.exact for j in consultants)
    if exact:
        found = _detect_exact(finite)
    else:
        flt = {k: (float(a), float(b)) for k, (a, b) in finite.items()}
        found = _detect_float(flt, max_denominator, rtol)
    if found is None:
        return None
    Q, offsets = found
    for k in finite:
        offsets.setdefault(k, 0)
    return LatticeSpec(Q=Q, offsets=offsets, absorbing=absorbing, exact=exact)


def consult_band(problem: Problem) -> tuple[float, float]:
    """Beliefs outside ``[c/u_Rr, 1 - c/u_Ll]`` can never profit from consulting."""
    u, c = problem.payoffs, float(problem.cost)
    lo = c / u.u_Rr if u.u_Rr > 0 else math.inf
    hi = 1 - c / u.u_Ll if u.u_Ll > 0 else -math.inf
    return lo, hi


def _k_range(base: np.ndarray, Q: float, problem: Problem):
    lo, hi = consult_band(problem)
    base = np.asarray(base, dtype=float)
    if not (lo <= hi and lo < 1 and hi > 0):
        return np.zeros(base.shape, int), np.full(base.shape, -1)
    x_lo, x_hi = logit(lo), logit(hi)
    with np.errstate(invalid="ignore"):
        k_min = np.ceil((x_lo - base) / Q - 1e-9)
        k_max = np.floor((x_hi - base) / Q + 1e-9)
    finite = np.isfinite(base)
    k_min = np.where(finite, k_min, 0).astype(int)
    k_max = np.where(finite, k_max, -1).astype(int)
    return k_min, k_max


def _check_spec(problem: Problem, spec: LatticeSpec):
    finite, absorbing = _signal_table(problem.consultants)
    missing = [k for k in finite if k not in spec.offsets]
    missing += [k for k in absorbing if k not in spec.absorbing]
    if missing:
        raise ValueError(f"lattice spec does not cover signals {missing}")


def build_lattice(problem: Problem, spec: LatticeSpec) -> Lattice:
    """Index band of beliefs ``logit(p0) + k*Q`` that lie in the consult band."""
    _check_spec(problem, spec)
    base = logit(problem.prior)
    k_min, k_max = _k_range(np.array([base]), spec.Q, problem)
    return Lattice(problem, spec, base, int(k_min[0]), int(k_max[0]))


class _BatchLattice:
    """Lattices for many priors solved together as padded 2-D arrays.

    Row ``i`` is the lattice of prior ``i``; slot ``a`` holds index
    ``k_min[i] + a``. Padding slots and out-of-band neighbours carry their
    stopping value and never change.
    """

    def __init__(self, problem: Problem, spec: LatticeSpec, bases: np.ndarray):
        self.problem, self.spec = problem, spec
        self.bases = np.asarray(bases, dtype=float)
        self.k_min, self.k_max = _k_range(self.bases, spec.Q, problem)
        self.width = max(1, int(np.max(self.k_max - self.k_min + 1, initial=0)))
        if self.width > MAX_LATTICE_WIDTH:
            raise LatticeTooLarge(f"band holds {self.width} lattice points (limit {MAX_LATTICE_WIDTH})")
        n = len(self.bases)
        slots = np.arange(self.width)
        self.valid = slots[None, :] <= (self.k_max - self.k_min)[:, None]
        m = max([abs(k) for k in spec.offsets.values()] + [0])
        self.pad = m
        ext = np.arange(-m, self.width + m)
        kk = self.k_min[:, None] + ext[None, :]
        with np.errstate(invalid="ignore"):
            self.ext_beliefs = expit(self.bases[:, None] + kk * spec.Q)
        fin = np.isfinite(self.bases)
        self.ext_beliefs[~fin] = np.where(self.bases[~fin] > 0, 1.0, 0.0)[:, None]
        self.beliefs = self.ext_beliefs[:, m:m + self.width]
        self.ext_stop = stopping_value(self.ext_beliefs, problem.payoffs)
        self.ext_valid = np.zeros_like(self.ext_beliefs, dtype=bool)
        self.ext_valid[:, m:m + self.width] = self.valid
        u = problem.payoffs
        self.terms = []
        for j in problem.consultants:
            jf = j.as_float()
            terms = []
            for s, sr, sl in zip(j.signals, jf.probs_r, jf.probs_l):
                if sr == 0 and sl == 0:
                    continue
                prob = self.beliefs * sr + (1 - self.beliefs) * sl
                target = spec.kind(j.id, s)
                if target == "r":
                    terms.append((prob, None, u.u_Rr))
                elif target == "l":
                    terms.append((prob, None, u.u_Ll))
                else:
                    terms.append((prob, int(target), None))
            self.terms.append(terms)
        self.n = n

    def scores(self, values: np.ndarray) -> np.ndarray:
        """Branch scores, shape ``(branches, n, width)``."""
        u, c = self.problem.payoffs, float(self.problem.cost)
        ext = self.ext_stop.copy()
        m = self.pad
        ext[:, m:m + self.width] = np.where(self.valid, values, ext[:, m:m + self.width])
        rows = [self.beliefs * u.u_Rr, (1 - self.beliefs) * u.u_Ll]
        for terms in self.terms:
            acc = np.zeros_like(self.beliefs)
            for prob, off, fixed in terms:
                if off is None:
                    acc += prob * fixed
                else:
                    acc += prob * ext[:, m + off:m + off + self.width]
            rows.append(acc - c)
        return np.stack(rows)

    def solve(self, tol: float, max_iters: int):
        values = stopping_value(self.beliefs, self.problem.payoffs)
        residual, it = math.inf, 0
        if self.problem.consulting_dominated or not self.valid.any():
            return values, 0, 0.0
        while it < max_iters:
            new = self.scores(values).max(axis=0)
            new = np.where(self.valid, new, values)
            residual = float(np.max(np.abs(new - values)))
            values = new
            it += 1
            if residual < tol:
                break
        return values, it, residual

    def choices(self, values: np.ndarray, tie_tol: float) -> np.ndarray:
        """Tie-broken branch index at every slot (-1 on padding)."""
        branches = branches_for(self.problem)
        sc = self.scores(values)
        choice = np.empty((self.n, self.width), dtype=int)
        for i in range(self.n):
            pol, _ = resolve_ties(sc[:, i, :], branches, tie_tol)
            choice[i] = [branches.index(d) for d in pol]
        return np.where(self.valid, choice, -1)

    def policy_values(self, choice: np.ndarray, state: str | None = None) -> np.ndarray:
        """Exact payoff of a fixed policy at every slot by a linear solve.

        With ``state`` given, signals are drawn from that state's row and
        payoffs are realised gains; with ``state=None`` signals follow the
        slot's belief and payoffs are expected gains.
        """
        u, c = self.problem.payoffs, float(self.problem.cost)
        w, m, n = self.width, self.pad, self.n

        def stop_gain(action: int, p: float) -> float:
            if state is None:
                return p * u.u_Rr if action == 0 else (1 - p) * u.u_Ll
            if action == 0:
                return u.u_Rr if state == "r" else 0.0
            return u.u_Ll if state == "l" else 0.0

        consultants = [j.as_float() for j in self.problem.consultants]
        rew = np.zeros((n, w))
        dense = w <= DENSE_WIDTH
        T_all = np.zeros((n, w, w)) if dense else None
        out = np.zeros((n, w))
        for i in range(n):
            rows, cols, data = [], [], []
            for a in range(w):
                b = choice[i, a]
                if b < 0:
                    continue
                p = self.beliefs[i, a]
                if b < 2:
                    rew[i, a] = stop_gain(b, p)
                    continue
                j = consultants[b - 2]
                rew[i, a] = -c
                for s, sr, sl in zip(j.signals, j.probs_r, j.probs_l):
                    if state is None:
                        pr = p * sr + (1 - p) * sl
                    else:
                        pr = sr if state == "r" else sl
                    if pr == 0:
                        continue
                    kind = self.spec.kind(j.id, s)
                    if kind == "r":
                        rew[i, a] += pr * stop_gain(0, 1.0)
                        continue
                    if kind == "l":
                        rew[i, a] += pr * stop_gain(1, 0.0)
                        continue
                    t = a + int(kind)
                    if 0 <= t < w and self.valid[i, t]:
                        rows.append(a)
                        cols.append(t)
                        data.append(pr)
                    else:
                        q = self.ext_beliefs[i, m + t]
                        act = 0 if q * u.u_Rr >= (1 - q) * u.u_Ll else 1
                        rew[i, a] += pr * stop_gain(act, q)
            # padding rows are identities with zero reward
            if dense:
                np.add.at(T_all[i], (rows, cols), data)
            else:
                T = sparse.csr_matrix((data, (rows, cols)), shape=(w, w))
                out[i] = spsolve((sparse.identity(w, format="csr") - T).tocsc(), rew[i])
        if dense:
            out = np.linalg.solve(np.eye(w)[None, :, :] - T_all, rew[..., None])[..., 0]
        return out

    def polish(self, values: np.ndarray, tie_tol: float) -> np.ndarray:
        """Replace converged values by the exact value of their greedy policy.

        Kept only if the result is a Bellman fixed point to round-off and not
        below the input, so a bad greedy choice can never degrade the answer.
        """
        exact = self.policy_values(self.choices(values, tie_tol))
        exact = np.where(self.valid, exact, values)
        resid = np.abs(np.where(self.valid, self.scores(exact).max(axis=0) - exact, 0.0))
        if resid.max(initial=0.0) < 1e-12 and np.all(exact >= values - 1e-12):
            return exact
        return values

    def state_lines(self, values: np.ndarray, tie_tol: float):
        """Per-state payoffs of the tie-broken policy at each prior's own index 0.

        Returns ``(A, B)``: expected payoff conditional on state r and on
        state l. The value at prior ``p`` is ``p*A + (1-p)*B``.
        """
        u = self.problem.payoffs
        choice = self.choices(values, tie_tol)
        out = []
        for state in ("r", "l"):
            x = self.policy_values(choice, state)
            val = np.empty(self.n)
            for i in range(self.n):
                a0 = -self.k_min[i]
                if 0 <= a0 < self.width and self.valid[i, a0]:
                    val[i] = x[i, a0]
                else:
                    p = expit(self.bases[i])
                    act = 0 if p * u.u_Rr >= (1 - p) * u.u_Ll else 1
                    val[i] = (u.u_Rr if state == "r" else 0.0) if act == 0 else (u.u_Ll if state == "l" else 0.0)
            out.append(val)
        return out[0], out[1]


def _max_iters(problem: Problem) -> int:
    return max(1000, math.ceil(200.0 / float(problem.cost)))


def solve_lattice(problem: Problem, lattice: Lattice | None = None, tol: float = LATTICE_TOL,
                  max_iters: int | None = None, tie_tol: float = TIE_TOL) -> Solution:
    """Solve the Bellman equation exactly on the lattice of ``problem.prior``.

    The returned table covers the revealed beliefs 0 and 1, every band point,
    and the prior itself when it lies outside the band (as a stop).
    """
    check_problem(problem)
    if lattice is None:
        spec = detect_rational_ratio(problem.consultants)
        if spec is None:
            raise ValueError("consultants do not have a rational ratio")
        lattice = build_lattice(problem, spec)
    batch = _BatchLattice(problem, lattice.spec, np.array([lattice.base]))
    cap = max_iters if max_iters is not None else _max_iters(problem)
    values, it, residual = batch.solve(tol, cap)
    if residual < tol and it:
        values = batch.polish(values, tie_tol)
    branches = branches_for(problem)
    u = problem.payoffs
    valid = batch.valid[0]
    band_p = batch.beliefs[0][valid]
    band_v = values[0][valid]
    band_scores = batch.scores(values)[:, 0, :][:, valid]

    extra = [0.0, 1.0]
    if lattice.empty or not (lattice.k_min <= 0 <= lattice.k_max):
        extra.append(float(problem.prior))
    extra = np.array(sorted(set(extra) - set(band_p.tolist())))
    extra_scores = np.vstack([extra * u.u_Rr, (1 - extra) * u.u_Ll]
                             + [np.full_like(extra, -np.inf)] * len(problem.consultants))
    grid = np.concatenate([band_p, extra])
    vals = np.concatenate([band_v, stopping_value(extra, u)])
    scores = np.concatenate([band_scores, extra_scores], axis=1)
    order = np.argsort(grid, kind="stable")
    grid, vals, scores = grid[order], vals[order], scores[:, order]
    policy, ties = resolve_ties(scores, branches, tie_tol)
    return Solution(problem, grid, vals, policy, ties, scores, branches,
                    iterations=it, residual=residual, kind="lattice",
                    converged=residual < tol or it == 0,
                    meta={"Q": lattice.spec.Q, "k_min": lattice.k_min, "k_max": lattice.k_max,
                          "base": lattice.base, "lattice": lattice})


def lattice_value(problem: Problem, spec: LatticeSpec | None = None) -> float:
    """Exact value at the problem's own prior."""
    if spec is None:
        spec = detect_rational_ratio(problem.consultants)
        if spec is None:
            raise ValueError("consultants do not have a rational ratio")
    sol = solve_lattice(problem, build_lattice(problem, spec))
    return float(np.interp(problem.prior, sol.grid, sol.values))


def prior_sweep(problem: Problem, spec: LatticeSpec, priors, tol: float = LATTICE_TOL,
                tie_tol: float = TIE_TOL):
    """Exact values at many priors plus the per-state payoffs of the optimal policies.

    Returns ``(values, A, B, converged)`` with ``values[i] = V(priors[i])``.
    """
    check_problem(problem)
    _check_spec(problem, spec)
    priors = np.asarray(priors, dtype=float)
    bases = np.array([logit(p) for p in priors])
    batch = _BatchLattice(problem, spec, bases)
    table, it, residual = batch.solve(tol, _max_iters(problem))
    if residual < tol and it:
        table = batch.polish(table, tie_tol)
    values = np.empty(len(priors))
    for i in range(len(priors)):
        a0 = -batch.k_min[i]
        if 0 <= a0 < batch.width and batch.valid[i, a0]:
            values[i] = table[i, a0]
        else:
            values[i] = stopping_value(priors[i], problem.payoffs)
    A, B = batch.state_lines(table, tie_tol)
    return values, A, B, residual < tol or it == 0


def piecewise_extract(problem: Problem, spec: LatticeSpec | None = None, priors=None,
                      atol: float = 1e-8) -> PiecewiseLinear:
    """Split the exact value curve over ``priors`` into maximal affine pieces.

    Each prior's optimal policy has a payoff linear in the prior; a segment
    continues while the values keep lying on the line of its first prior's
    policy. ``problem.prior`` is ignored.
    """
    if spec is None:
        spec = detect_rational_ratio(problem.consultants)
        if spec is None:
            raise ValueError("consultants do not have a rational ratio")
    if priors is None:
        priors = np.linspace(0.001, 0.999, 2001)
    priors = np.asarray(priors, dtype=float)
    values, A, B, _ = prior_sweep(problem, spec, priors)
    slopes_all = A - B
    starts, ends, slopes, intercepts = [], [], [], []
    i, n = 0, len(priors)
    max_res = 0.0
    while i < n:
        slope, icpt = slopes_all[i], B[i]
        j = i + 1
        while j < n and abs(values[j] - (icpt + slope * priors[j])) < atol:
            j += 1
        seg = slice(i, j)
        res = float(np.max(np.abs(values[seg] - (icpt + slope * priors[seg]))))
        max_res = max(max_res, res)
        starts.append(priors[i])
        ends.append(priors[j - 1])
        slopes.append(slope)
        intercepts.append(icpt)
        i = j
    slopes, intercepts = np.array(slopes), np.array(intercepts)
    bps = []
    for k in range(len(slopes) - 1):
        ds = slopes[k] - slopes[k + 1]
        x = (intercepts[k + 1] - intercepts[k]) / ds if ds != 0 else math.nan
        if not (ends[k] <= x <= starts[k + 1]):
            x = 0.5 * (ends[k] + starts[k + 1])
        bps.append(x)
    return PiecewiseLinear(priors, values, np.array(starts), np.array(ends), slopes, intercepts,
                           np.array(bps), max_res)


def rational_or_none(problem: Problem) -> LatticeSpec | None:
    return detect_rational_ratio(problem.consultants)


def piecewise_thresholds(problem: Problem, pw: PiecewiseLinear, atol: float = 1e-9):
    """Stopping thresholds read off an extracted value curve.

    ``p_L`` is where the curve leaves the StopL line ``u_Ll*(1-p)`` and
    ``p_R`` where it joins the StopR line ``u_Rr*p``. Returns ``None`` when
    the sweep does not start on the StopL line or end on the StopR line.
    """
    u = problem.payoffs
    first_l = abs(pw.slopes[0] + u.u_Ll) < atol and abs(pw.intercepts[0] - u.u_Ll) < atol
    last_r = abs(pw.slopes[-1] - u.u_Rr) < atol and abs(pw.intercepts[-1]) < atol
    if not (first_l and last_r):
        return None
    if pw.n_segments == 1:
        return None
    return float(pw.breakpoints[0]), float(pw.breakpoints[-1])
