import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consultant_dp.model import (STOP_L, STOP_R, Belief, Consult, Consultant, Decision, InfiniteLogOddsStep,
                                 Payoffs, Problem, ZeroProbabilitySignal, check_problem, estimator, expit,
                                 log_odds_update, logit, posterior, posterior_after_repeats, signal_prob,
                                 stopping_value, validate_problem)
from consultant_dp.presets import example2, example2_consultants

EST = estimator(0.8)
REVEALER = example2_consultants()[1]


@st.composite
def consultants(draw, n_signals=None):
    n = draw(st.integers(2, 4)) if n_signals is None else n_signals
    raw_r = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    raw_l = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    r = [x / sum(raw_r) for x in raw_r]
    l = [x / sum(raw_l) for x in raw_l]
    return Consultant("j", tuple("abcd"[:n]), tuple(r), tuple(l))


beliefs = st.floats(0.0, 1.0)
interior = st.floats(1e-6, 1 - 1e-6)


class TestValidation:
    def test_example2_is_valid(self):
        assert validate_problem(example2(cost=0.1)) == []

    def test_row_sum_violation(self):
        bad = Consultant("x", ("a", "b"), (0.5, 0.4), (0.5, 0.5))
        codes = [v.code for v in validate_problem(Problem(0.5, (bad,), 0.1))]
        assert codes == ["row_sum"]

    def test_cost_above_payoff_is_advisory(self):
        vs = validate_problem(Problem(0.5, (EST,), 1.5))
        assert [(v.code, v.severity) for v in vs] == [("cost_range", "advisory")]
        check_problem(Problem(0.5, (EST,), 1.5))  # advisories do not raise

    def test_collects_every_violation(self):
        bad = Consultant("x", ("a", "a"), (1.2, -0.2), (0.5,))
        vs = validate_problem(Problem(1.5, (bad, bad), -1, Payoffs(0.5, 0.5)))
        codes = {v.code for v in vs}
        assert {"duplicate_id", "duplicate_signal", "prob_range", "row_length",
                "prior_range", "payoff_normalization", "cost_nonpositive"} <= codes

    def test_no_consultants(self):
        assert [v.code for v in validate_problem(Problem(0.5, (), 0.1))] == ["no_consultants"]

    def test_row_sum_tolerance(self):
        near = Consultant("x", ("a", "b"), (0.5, 0.5 + 5e-13), (0.5, 0.5))
        assert validate_problem(Problem(0.5, (near,), 0.1)) == []

    def test_check_problem_raises_with_code(self):
        with pytest.raises(ValueError, match="cost_nonpositive"):
            check_problem(Problem(0.5, (EST,), 0.0))


class TestPosterior:
    def test_estimator_signal(self):
        assert posterior(0.5, EST, "r") == pytest.approx(0.8, abs=1e-15)

    def test_uninformative_signal(self):
        assert posterior(0.37, REVEALER, "null") == pytest.approx(0.37, abs=1e-15)

    def test_revealing_signal_is_exact(self):
        assert posterior(0.3, REVEALER, "r") == 1.0
        assert posterior(0.3, REVEALER, "l") == 0.0

    def test_impossible_signal(self):
        with pytest.raises(ZeroProbabilitySignal):
            posterior(1.0, REVEALER, "l")
        dead = Consultant("d", ("a", "b"), (1.0, 0.0), (1.0, 0.0))
        with pytest.raises(ZeroProbabilitySignal):
            posterior(0.5, dead, "b")

    def test_fractions_stay_exact(self):
        j = estimator(Fraction(4, 5))
        assert posterior(Fraction(1, 2), j, "r") == Fraction(4, 5)

    def test_accepts_belief(self):
        assert posterior(Belief(0.5), EST, "l") == pytest.approx(0.2)


class TestSignalProb:
    def test_symmetric_half(self):
        assert signal_prob(0.5, EST, "r") == pytest.approx(0.5)

    def test_revealer_silence(self):
        assert signal_prob(0.3, REVEALER, "null") == pytest.approx(0.95)

    def test_low_prior(self):
        assert signal_prob(0.2, EST, "r") == pytest.approx(0.32)


class TestRepeats:
    def test_two_matches(self):
        assert posterior_after_repeats(0.5, EST, "r", 2) == pytest.approx(16 / 17, abs=1e-15)

    def test_zero_repeats(self):
        assert posterior_after_repeats(0.42, EST, "l", 0) == 0.42

    def test_three_matches(self):
        assert posterior_after_repeats(0.5, EST, "r", 3) == pytest.approx(0.512 / 0.520, abs=1e-15)

    def test_negative_n(self):
        with pytest.raises(ValueError):
            posterior_after_repeats(0.5, EST, "r", -1)

    @given(interior, st.integers(0, 12))
    def test_matches_iterated_posterior(self, p, n):
        q = p
        for _ in range(n):
            q = posterior(q, EST, "r")
        assert posterior_after_repeats(p, EST, "r", n) == pytest.approx(q, abs=1e-12)


class TestLogOdds:
    def test_single_step(self):
        assert logit(log_odds_update(0.5, EST, "r")) == pytest.approx(math.log(4), abs=1e-12)

    def test_uninformative_step(self):
        assert log_odds_update(0.3, REVEALER, "null") == pytest.approx(0.3, abs=1e-15)

    def test_two_steps(self):
        p = log_odds_update(log_odds_update(0.5, EST, "r"), EST, "r")
        assert logit(p) == pytest.approx(2 * math.log(4), abs=1e-12)
        assert p == pytest.approx(16 / 17, abs=1e-12)

    def test_revealing_step_rejected(self):
        with pytest.raises(InfiniteLogOddsStep):
            log_odds_update(0.3, REVEALER, "r")

    @given(consultants(), interior, st.data())
    def test_agrees_with_posterior(self, j, p, data):
        s = data.draw(st.sampled_from(j.signals))
        assert log_odds_update(p, j, s) == pytest.approx(posterior(p, j, s), abs=1e-12)

    def test_belief_infinities(self):
        assert Belief(1.0).log_odds == math.inf
        assert Belief(0.0).log_odds == -math.inf
        assert Belief.from_log_odds(-math.inf).p == 0.0

    @given(st.floats(1e-9, 1 - 1e-9))
    def test_round_trip(self, p):
        assert Belief.from_log_odds(Belief(p).log_odds).p == pytest.approx(p, abs=1e-12)

    def test_belief_range(self):
        with pytest.raises(ValueError):
            Belief(1.1)


class TestBayesProperties:
    @given(consultants(), beliefs)
    def test_martingale(self, j, p):
        total = sum(signal_prob(p, j, s) * posterior(p, j, s) for s in j.signals if signal_prob(p, j, s) > 0)
        assert total == pytest.approx(p, abs=1e-12)

    @given(consultants(), beliefs)
    def test_signal_probs_sum_to_one(self, j, p):
        assert sum(signal_prob(p, j, s) for s in j.signals) == pytest.approx(1.0, abs=1e-12)

    @given(consultants(), consultants(), interior, st.data())
    def test_commutation(self, j, i, p, data):
        i = Consultant("i", i.signals, i.probs_r, i.probs_l)
        s1 = data.draw(st.sampled_from(j.signals))
        s2 = data.draw(st.sampled_from(i.signals))
        a = posterior(posterior(p, j, s1), i, s2)
        b = posterior(posterior(p, i, s2), j, s1)
        assert a == pytest.approx(b, abs=1e-12)

    @given(consultants(), st.data())
    def test_boundary_absorption(self, j, data):
        s = data.draw(st.sampled_from(j.signals))
        assert posterior(1.0, j, s) == 1.0
        assert posterior(0.0, j, s) == 0.0


class TestDecisionAndMisc:
    def test_decision_strings_round_trip(self):
        for d in (STOP_R, STOP_L, Consult("c2")):
            assert Decision.parse(str(d)) == d
        assert str(Consult("c1")) == "consult:c1"

    def test_bad_decisions(self):
        with pytest.raises(ValueError):
            Decision("X")
        with pytest.raises(ValueError):
            Decision("R", "c1")
        with pytest.raises(ValueError):
            Decision.parse("maybe")

    def test_stopping_value(self):
        assert stopping_value(1.0, Payoffs()) == 1.0
        assert stopping_value(0.5, Payoffs()) == 0.5
        assert stopping_value(0.7, Payoffs(1.0, 0.5)) == pytest.approx(0.7)

    def test_expit_logit_edges(self):
        assert expit(math.inf) == 1.0 and expit(-math.inf) == 0.0
        assert logit(0.0) == -math.inf and logit(1.0) == math.inf

    def test_problem_helpers(self):
        pr = example2(cost=0.1)
        assert pr.consultant("c2") is pr.consultants[1]
        assert pr.signal_set == ("r", "l", "null")
        assert pr.replace(cost=2.0).consulting_dominated
        with pytest.raises(KeyError):
            pr.consultant("zz")
        with pytest.raises(KeyError):
            pr.consultants[0].likelihood("zz", "r")

    def test_revealing_signals(self):
        assert REVEALER.revealing_signals("r") == ["r"]
        assert REVEALER.is_revealing and not EST.is_revealing
        assert EST.is_informative
