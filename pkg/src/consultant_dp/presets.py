"""Ready-made consultants and problems from the worked examples."""

from __future__ import annotations

from fractions import Fraction

from .model import Consultant, Payoffs, Problem

THREE = ("r", "l", "null")


def three_signal(cid: str, match, mismatch, null) -> Consultant:
    return Consultant(cid, THREE, (match, mismatch, null), (mismatch, match, null))


def example1_consultants() -> tuple[Consultant, Consultant]:
    """An estimator (0.8) and a noisy three-signal consultant (0.625/0.035/0.34)."""
    return (three_signal("c1", 0.8, 0.2, 0.0),
            three_signal("c2", 0.625, 0.035, 0.34))


def example1(prior: float = 0.5, cost: float = 0.01) -> Problem:
    return Problem(prior, example1_consultants(), cost, Payoffs(1.0, 1.0))


def example2_consultants() -> tuple[Consultant, Consultant]:
    """An estimator (0.8) and a revealer that discloses the state w.p. 0.05."""
    return (three_signal("c1", 0.8, 0.2, 0.0),
            three_signal("c2", 0.05, 0.0, 0.95))


def example2(prior: float = 0.5, cost: float = 0.1) -> Problem:
    return Problem(prior, example2_consultants(), cost, Payoffs(1.0, 1.0))


def example3_consultant(x: float = 0.8, y: float = 0.4) -> Consultant:
    """Two-signal consultant with ``S(a|r)=x`` and ``S(a|l)=y``."""
    return Consultant("c1", ("a", "b"), (x, 1 - x), (y, 1 - y))


def example4_j1(exact: bool = False) -> Consultant:
    q = Fraction(4, 5) if exact else 0.8
    return three_signal("j1", q, 1 - q, 0 * q)


def example4_j2(exact: bool = False) -> Consultant:
    """The (q=16/17, t=17/50) consultant: 16/50 match, 1/50 mismatch, 33/50 silent."""
    if exact:
        return three_signal("j2", Fraction(16, 50), Fraction(1, 50), Fraction(33, 50))
    return three_signal("j2", 16 / 50, 1 / 50, 33 / 50)


def example4_g1(cost: float, prior: float = 0.5, exact: bool = False) -> Problem:
    return Problem(prior, (example4_j1(exact),), cost)


def example4_g2(cost: float = 0.05, prior: float = 0.5, exact: bool = False) -> Problem:
    return Problem(prior, (example4_j2(exact),), cost)
