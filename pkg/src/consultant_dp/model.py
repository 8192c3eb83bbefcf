"""Domain types and Bayesian belief arithmetic for the two-state investment problem.

States are ``"r"`` and ``"l"``; actions are ``R`` and ``L``. A belief is the
probability of state ``r``. Likelihoods may be floats or
:class:`fractions.Fraction` (exact mode); all arithmetic here works with either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

PROB_TOL = 1e-12

STATES = ("r", "l")


class ZeroProbabilitySignal(ValueError):
    """The signal cannot occur at the given belief."""


class InfiniteLogOddsStep(ValueError):
    """A revealing signal has no finite log-likelihood ratio."""


@dataclass(frozen=True)
class Consultant:
    """A signal matrix ``S(s|w)`` for the two states.

    ``probs_r[i]`` is the probability of ``signals[i]`` in state r and
    ``probs_l[i]`` the same in state l.
    """

    id: str
    signals: tuple[str, ...]
    probs_r: tuple
    probs_l: tuple

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "probs_r", tuple(self.probs_r))
        object.__setattr__(self, "probs_l", tuple(self.probs_l))

    def index(self, s: str) -> int:
        try:
            return self.signals.index(s)
        except ValueError:
            raise KeyError(f"consultant {self.id!r} has no signal {s!r}") from None

    def likelihood(self, s: str, state: str):
        i = self.index(s)
        if state == "r":
            return self.probs_r[i]
        if state == "l":
            return self.probs_l[i]
        raise KeyError(f"unknown state {state!r}")

    @property
    def exact(self) -> bool:
        return all(isinstance(x, (Fraction, int)) for x in self.probs_r + self.probs_l)

    def as_float(self) -> Consultant:
        return Consultant(self.id, self.signals,
                          tuple(float(x) for x in self.probs_r),
                          tuple(float(x) for x in self.probs_l))

    def revealing_signals(self, state: str) -> list[str]:
        """Signals that occur in ``state`` and never in the other state."""
        own, other = (self.probs_r, self.probs_l) if state == "r" else (self.probs_l, self.probs_r)
        return [s for s, a, b in zip(self.signals, own, other) if a > 0 and b == 0]

    @property
    def is_revealing(self) -> bool:
        return bool(self.revealing_signals("r")) and bool(self.revealing_signals("l"))

    @property
    def is_informative(self) -> bool:
        return any(a != b for a, b in zip(self.probs_r, self.probs_l))


@dataclass(frozen=True)
class Payoffs:
    u_Rr: float = 1.0
    u_Ll: float = 1.0

    @property
    def max(self) -> float:
        return max(self.u_Rr, self.u_Ll)


@dataclass(frozen=True)
class Problem:
    prior: float
    consultants: tuple[Consultant, ...]
    cost: float
    payoffs: Payoffs = field(default_factory=Payoffs)

    def __post_init__(self):
        object.__setattr__(self, "consultants", tuple(self.consultants))

    def consultant(self, cid: str) -> Consultant:
        for j in self.consultants:
            if j.id == cid:
                return j
        raise KeyError(f"no consultant {cid!r}")

    def replace(self, **changes) -> Problem:
        kw = dict(prior=self.prior, consultants=self.consultants,
                  cost=self.cost, payoffs=self.payoffs)
        kw.update(changes)
        return Problem(**kw)

    @property
    def signal_set(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for j in self.consultants:
            for s in j.signals:
                seen.setdefault(s)
        return tuple(seen)

    @property
    def consulting_dominated(self) -> bool:
        """True when ``c >= max(u)``: no consultation can ever pay off."""
        return self.cost >= self.payoffs.max


def logit(p: float) -> float:
    p = float(p)
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    return math.log(p) - math.log1p(-p)


def expit(x: float) -> float:
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class Belief:
    """Probability of state r, convertible to and from log-odds."""

    p: float

    def __post_init__(self):
        if not 0.0 <= float(self.p) <= 1.0:
            raise ValueError(f"belief {self.p} outside [0, 1]")

    @classmethod
    def from_log_odds(cls, x: float) -> Belief:
        return cls(expit(x))

    @property
    def log_odds(self) -> float:
        return logit(self.p)

    def __float__(self) -> float:
        return float(self.p)


@dataclass(frozen=True)
class Decision:
    """Stop with action R or L, or consult a consultant by id."""

    kind: str
    consultant: str | None = None

    def __post_init__(self):
        if self.kind not in ("R", "L", "consult"):
            raise ValueError(f"bad decision kind {self.kind!r}")
        if (self.kind == "consult") != (self.consultant is not None):
            raise ValueError("consult decisions need a consultant id, stops must not have one")

    @property
    def is_stop(self) -> bool:
        return self.kind != "consult"

    def __str__(self) -> str:
        return self.kind if self.is_stop else f"consult:{self.consultant}"

    @classmethod
    def parse(cls, text: str) -> Decision:
        if text in ("R", "L"):
            return cls(text)
        if text.startswith("consult:"):
            return cls("consult", text.split(":", 1)[1])
        raise ValueError(f"cannot parse decision {text!r}")


STOP_R = Decision("R")
STOP_L = Decision("L")


def Consult(cid: str) -> Decision:
    return Decision("consult", cid)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"  # or "advisory"


def _row_problems(j: Consultant) -> list[Violation]:
    out = []
    n = len(j.signals)
    if len(set(j.signals)) != n:
        out.append(Violation("duplicate_signal", f"consultant {j.id!r} repeats a signal label"))
    for state, row in (("r", j.probs_r), ("l", j.probs_l)):
        if len(row) != n:
            out.append(Violation("row_length",
                                 f"consultant {j.id!r}: row {state} has {len(row)} entries for {n} signals"))
            continue
        bad = [x for x in row if not 0 <= x <= 1]
        if bad:
            out.append(Violation("prob_range", f"consultant {j.id!r}: row {state} has entries outside [0,1]: {bad}"))
        total = sum(row)
        if abs(total - 1) > PROB_TOL:
            out.append(Violation("row_sum", f"consultant {j.id!r}: row {state} sums to {float(total)!r}"))
    return out


def validate_problem(problem: Problem) -> list[Violation]:
    """Return every well-formedness violation; an empty list means valid.

    ``c >= max(u)`` is reported with severity ``"advisory"``: such a problem is
    solvable (never consult) but outside the usual standing assumption.
    """
    out: list[Violation] = []
    if not problem.consultants:
        out.append(Violation("no_consultants", "problem has no consultants"))
    ids = [j.id for j in problem.consultants]
    if len(set(ids)) != len(ids):
        out.append(Violation("duplicate_id", f"consultant ids are not unique: {ids}"))
    for j in problem.consultants:
        out.extend(_row_problems(j))
    if not 0 <= problem.prior <= 1:
        out.append(Violation("prior_range", f"prior {problem.prior} outside [0,1]"))
    u = problem.payoffs
    if u.u_Rr < 0 or u.u_Ll < 0:
        out.append(Violation("payoff_negative", f"payoffs must be nonnegative, got {u}"))
    elif abs(u.max - 1) > PROB_TOL:
        out.append(Violation("payoff_normalization", f"max payoff must be 1, got {u.max}"))
    if not problem.cost > 0:
        out.append(Violation("cost_nonpositive", f"cost must be positive, got {problem.cost}"))
    elif problem.cost >= u.max:
        out.append(Violation("cost_range",
                             f"cost {problem.cost} >= max payoff {u.max}: consulting never pays",
                             severity="advisory"))
    return out


def check_problem(problem: Problem) -> None:
    """Raise ``ValueError`` if ``validate_problem`` reports any error."""
    errors = [v for v in validate_problem(problem) if v.severity == "error"]
    if errors:
        raise ValueError("invalid problem: " + "; ".join(f"[{v.code}] {v.message}" for v in errors))


def signal_prob(p, j: Consultant, s: str):
    """Probability that consultant ``j`` sends ``s`` when the belief is ``p``."""
    p = _p(p)
    return p * j.likelihood(s, "r") + (1 - p) * j.likelihood(s, "l")


def posterior(p, j: Consultant, s: str):
    """Bayes update of belief ``p`` after ``j`` reports ``s``.

    Uses the ratio-free form so revealing signals give exactly 0 or 1.
    """
    p = _p(p)
    a = p * j.likelihood(s, "r")
    b = (1 - p) * j.likelihood(s, "l")
    if a + b == 0:
        raise ZeroProbabilitySignal(f"signal {s!r} of {j.id!r} has zero probability at p={p}")
    if b == 0:
        return type(a)(1)
    if a == 0:
        return type(a)(0)
    return a / (a + b)


def posterior_after_repeats(p, j: Consultant, s: str, n: int):
    """Belief after ``n`` consecutive reports of ``s`` by ``j``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    p = _p(p)
    if n == 0:
        return p
    a = p * j.likelihood(s, "r") ** n
    b = (1 - p) * j.likelihood(s, "l") ** n
    if a + b == 0:
        raise ZeroProbabilitySignal(f"{n} repeats of {s!r} from {j.id!r} impossible at p={p}")
    if b == 0:
        return type(a)(1)
    if a == 0:
        return type(a)(0)
    return a / (a + b)


def log_likelihood_ratio(j: Consultant, s: str) -> float:
    a, b = j.likelihood(s, "r"), j.likelihood(s, "l")
    if a == 0 or b == 0:
        raise InfiniteLogOddsStep(f"signal {s!r} of {j.id!r} is revealing or impossible")
    return math.log(a) - math.log(b)


def log_odds_update(p, j: Consultant, s: str) -> float:
    """Same as :func:`posterior` but computed by adding the log-likelihood ratio."""
    step = log_likelihood_ratio(j, s)
    p = float(_p(p))
    if not 0 < p < 1:
        raise ValueError("log-odds update needs an interior belief")
    return expit(logit(p) + step)


def stopping_value(p, payoffs: Payoffs):
    p = _p(p)
    return max(p * payoffs.u_Rr, (1 - p) * payoffs.u_Ll)


def _p(p):
    if isinstance(p, Belief):
        return p.p
    return p


def estimator(q, cid: str = "est") -> Consultant:
    """Two-signal symmetric consultant whose report matches the state w.p. ``q``."""
    return Consultant(cid, ("r", "l"), (q, 1 - q), (1 - q, q))


def consultant_from_rows(cid: str, signals: Sequence[str], row_r, row_l) -> Consultant:
    return Consultant(cid, tuple(signals), tuple(row_r), tuple(row_l))
