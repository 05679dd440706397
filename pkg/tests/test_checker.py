"""
Unit and property tests for the checker module.

Tests evaluation on the fixture models, plan synthesis, witness
verification, the brute-force oracle, and the semantic laws of the
knowing-how modality over generated models.
"""

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from tests.strategies import formulas, models, models_with_sets

PROPERTY_SETTINGS = settings(
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow],
)


def _ext(model, text):
    from khm_toolkit.checker import extension
    from khm_toolkit.syntax import parse

    return extension(model, parse(text))


class TestEvaluate:
    """Tests for evaluate() on the fixture models."""

    def test_m1_kh(self, m1):
        """Test Kh(p, q) holds on the chain model."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import parse

        assert evaluate(m1, "s1", parse("Kh(p, q)")) is True

    def test_m3_values(self, m3):
        """Test the three Khm formulas of the branching model."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import parse

        assert evaluate(m3, "s1", parse("Khm(p, false, o)"))
        assert evaluate(m3, "s1", parse("Khm(p, o, q)"))
        assert evaluate(m3, "s2", parse("Khm(p, o, q)"))
        assert not evaluate(m3, "s1", parse("Khm(p, false, q)"))

    def test_m4_chain_is_broken(self, m4):
        """Test the o-constrained route from p' to q does not exist."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import parse

        assert evaluate(m4, "w", parse("Khm(p', false, p)"))
        assert evaluate(m4, "w", parse("Khm(p, o, q)"))
        assert not evaluate(m4, "w", parse("Khm(p', o, q)"))

    def test_universal(self, m1):
        """Test U is true iff its body holds everywhere."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import parse

        assert evaluate(m1, "s1", parse("U(p | !p)"))
        assert not evaluate(m1, "s2", parse("U(p)"))

    def test_unknown_state(self, m1):
        """Test evaluation at an undeclared state raises UnknownState."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.errors import UnknownState
        from khm_toolkit.syntax import parse

        with pytest.raises(UnknownState):
            evaluate(m1, "nowhere", parse("p"))

    def test_vacuous_precondition(self, m1):
        """Test Khm with an unsatisfiable precondition is true."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import parse

        assert evaluate(m1, "s1", parse("Khm(false, false, false)"))


class TestExtension:
    """Tests for extension() and valid_on()."""

    def test_atoms(self, m1, m2):
        """Test atom extensions."""
        assert _ext(m1, "p") == {"s2", "s3"}
        assert _ext(m2, "q") == {"s4"}

    def test_top(self, m1):
        """Test true holds at all eight states."""
        assert _ext(m1, "true") == set(m1.states)
        assert len(_ext(m1, "true")) == 8

    def test_extension_object(self, m1):
        """Test Evaluator.extension carries its formula."""
        from khm_toolkit.checker import evaluator_for
        from khm_toolkit.syntax import parse

        f = parse("q")
        ext = evaluator_for(m1).extension(f)

        assert ext.formula == f
        assert ext.states == {"s4", "s7", "s8"}

    def test_valid_on(self, m3, m4, tiny_model):
        """Test per-model validity."""
        from khm_toolkit.checker import valid_on
        from khm_toolkit.syntax import parse

        one = parse("Khm(p, o, q) & !Khm(p, false, q) -> Khm(p, false, o)")
        chaining = parse("Khm(p', false, p) & Khm(p, o, q) -> Khm(p', o, q)")

        assert valid_on(m3, one)
        assert not valid_on(m4, chaining)
        assert valid_on(tiny_model, parse("true"))

    def test_falsifying_states(self, m1):
        """Test falsifying states are listed in declaration order."""
        from khm_toolkit.checker import falsifying_states
        from khm_toolkit.syntax import parse

        assert falsifying_states(m1, parse("!q")) == ["s4", "s7", "s8"]

    def test_equal_models_keep_separate_evaluators(self, m1):
        """Test an equal copy outlives the evaluator of the original."""
        import gc

        from khm_toolkit import checker
        from khm_toolkit.model import load_model, model_to_json
        from khm_toolkit.syntax import parse

        text = model_to_json(m1)
        first, second = load_model(text), load_model(text)
        assert first == second
        assert checker.evaluator_for(first) is not checker.evaluator_for(second)

        key = id(first)
        checker.valid_on(first, parse("Kh(p, q)"))
        del first
        gc.collect()

        assert key not in checker._evaluators
        assert checker.extension(second, parse("q")) == {"s4", "s7", "s8"}
        assert checker.evaluator_for(second).witness(parse("Kh(p, q)")) == ("r", "u")


class TestSynthesize:
    """Tests for synthesize()."""

    def test_m1_ru(self, m1):
        """Test the shortest plan on the chain model is ru."""
        from khm_toolkit.checker import synthesize

        plan = synthesize(m1, _ext(m1, "p"), _ext(m1, "true"), _ext(m1, "q"))
        assert plan == ("r", "u")

    def test_m3_ab(self, m3):
        """Test the o-constrained plan on the branching model is ab."""
        from khm_toolkit.checker import synthesize

        assert synthesize(m3, _ext(m3, "p"), _ext(m3, "o"), _ext(m3, "q")) == ("a", "b")

    def test_empty_pre_returns_epsilon(self, m3):
        """Test an empty start set needs no actions."""
        from khm_toolkit.checker import synthesize

        assert synthesize(m3, set(), set(), set()) == ()

    def test_pre_inside_goal_returns_epsilon(self, m1):
        """Test starting inside the goal needs no actions."""
        from khm_toolkit.checker import synthesize

        assert synthesize(m1, {"s4"}, set(), {"s4", "s7"}) == ()

    def test_m4_no_plan(self, m4):
        """Test the broken chain has no plan."""
        from khm_toolkit.checker import synthesize

        assert synthesize(m4, _ext(m4, "p'"), _ext(m4, "o"), _ext(m4, "q")) is None

    def test_lexicographic_tie_break(self):
        """Test equally short plans are broken by alphabet order."""
        from khm_toolkit.checker import synthesize
        from khm_toolkit.model import Model

        model = Model(
            states=("s", "t"),
            valuation={},
            transitions=frozenset({("s", "y", "t"), ("s", "x", "t")}),
            alphabet=("y", "x"),
        )
        assert synthesize(model, {"s"}, set(), {"t"}) == ("y",)

    def test_intermediate_outside_mid_blocks(self):
        """Test a route through a state outside the constraint is not a plan."""
        from khm_toolkit.checker import synthesize
        from khm_toolkit.model import Model

        model = Model(
            states=("s", "u", "t"),
            valuation={},
            transitions=frozenset({("s", "a", "u"), ("u", "a", "t")}),
            alphabet=("a",),
        )
        assert synthesize(model, {"s"}, set(), {"t"}) is None
        assert synthesize(model, {"s"}, {"u"}, {"t"}) == ("a", "a")

    def test_search_plan_cap(self, m1):
        """Test a length cap cuts off longer plans."""
        from khm_toolkit.checker import search_plan

        table = m1.succ_table()
        pre = m1.mask_of(["s2", "s3"])
        goal = m1.mask_of(["s4", "s7", "s8"])

        assert search_plan(table, pre, m1.full_mask, goal, max_len=1) is None
        assert search_plan(table, pre, m1.full_mask, goal, max_len=2) == (0, 1)


class TestVerifyWitness:
    """Tests for verify_witness()."""

    def test_m1_ru(self, m1):
        """Test ru is accepted on the chain model."""
        from khm_toolkit.checker import verify_witness

        assert verify_witness(m1, _ext(m1, "p"), m1.states, _ext(m1, "q"), ("r", "u"))

    def test_m2_not_strongly_executable(self, m2):
        """Test ab is rejected from s1 because s3 cannot do b."""
        from khm_toolkit.checker import verify_witness

        assert not verify_witness(m2, {"s1"}, m2.states, _ext(m2, "q"), ("a", "b"))

    def test_m3_empty_plan(self, m3):
        """Test the empty plan fails when the start is not a goal state."""
        from khm_toolkit.checker import verify_witness

        assert not verify_witness(m3, _ext(m3, "p"), _ext(m3, "o"), _ext(m3, "q"), ())

    def test_unknown_action_is_rejected(self, m3):
        """Test plans with labels outside the alphabet are rejected."""
        from khm_toolkit.checker import verify_witness

        assert not verify_witness(m3, {"s1"}, m3.states, m3.states, ("z",))


class TestBruteForce:
    """Tests for brute_force()."""

    def test_m1_ru(self, m1):
        """Test the oracle finds ru within length 2."""
        from khm_toolkit.checker import brute_force

        assert brute_force(m1, _ext(m1, "p"), _ext(m1, "true"), _ext(m1, "q"), 2) == ("r", "u")

    def test_m1_no_length_one_plan(self, m1):
        """Test no plan of length at most 1 exists on the chain model."""
        from khm_toolkit.checker import brute_force

        assert brute_force(m1, _ext(m1, "p"), _ext(m1, "true"), _ext(m1, "q"), 1) is None

    def test_m3_false_constraint(self, m3):
        """Test no plan of length at most 1 reaches q without intermediates."""
        from khm_toolkit.checker import brute_force

        assert brute_force(m3, _ext(m3, "p"), set(), _ext(m3, "q"), 1) is None

    def test_m3_ab(self, m3):
        """Test the oracle finds ab."""
        from khm_toolkit.checker import brute_force

        assert brute_force(m3, _ext(m3, "p"), _ext(m3, "o"), _ext(m3, "q"), 2) == ("a", "b")

    def test_m4_exhausted(self, m4):
        """Test the oracle agrees that the broken chain has no plan."""
        from khm_toolkit.checker import brute_force

        assert brute_force(m4, _ext(m4, "p'"), _ext(m4, "o"), _ext(m4, "q"), 2 ** 4) is None

    def test_negative_length(self, m1):
        """Test a negative bound is rejected."""
        from khm_toolkit.checker import brute_force

        with pytest.raises(ValueError):
            brute_force(m1, set(), set(), set(), -1)


class TestPlannerProperties:
    """Property tests relating the planner, the verifier and the oracle."""

    @PROPERTY_SETTINGS
    @given(models_with_sets())
    def test_planner_soundness(self, case):
        """Test every synthesized plan is accepted by verify_witness."""
        from khm_toolkit.checker import synthesize, verify_witness

        model, pre, mid, goal = case
        plan = synthesize(model, pre, mid, goal)
        if plan is not None:
            assert verify_witness(model, pre, mid, goal, plan)

    @PROPERTY_SETTINGS
    @given(models_with_sets(max_states=5, max_actions=2))
    def test_planner_agrees_with_oracle(self, case):
        """Test existence, length and the plan itself agree with brute force."""
        from khm_toolkit.checker import brute_force, synthesize

        model, pre, mid, goal = case
        plan = synthesize(model, pre, mid, goal)
        oracle = brute_force(model, pre, mid, goal, 2 ** len(model.states))

        assert (plan is None) == (oracle is None)
        if plan is not None:
            assert plan == oracle

    @PROPERTY_SETTINGS
    @given(models_with_sets(), st.data())
    def test_composition(self, case, data):
        """Test concatenating witnesses through an intermediate set inside mid."""
        from khm_toolkit.checker import synthesize, verify_witness

        model, pre, mid, goal = case
        middle = data.draw(st.frozensets(st.sampled_from(sorted(mid)))) if mid else frozenset()
        first = synthesize(model, pre, mid, middle)
        second = synthesize(model, middle, mid, goal)
        assume(first is not None and second is not None)

        assert verify_witness(model, pre, mid, goal, first + second)

    @PROPERTY_SETTINGS
    @given(models_with_sets(), st.data())
    def test_monotonicity(self, case, data):
        """Test a witness survives a smaller start, looser constraint and bigger goal."""
        from khm_toolkit.checker import synthesize, verify_witness

        model, pre, mid, goal = case
        plan = synthesize(model, pre, mid, goal)
        assume(plan is not None)

        states = st.sampled_from(model.states)
        smaller_pre = data.draw(st.frozensets(st.sampled_from(sorted(pre)))) if pre else frozenset()
        looser_mid = frozenset(mid) | data.draw(st.frozensets(states))
        bigger_goal = frozenset(goal) | data.draw(st.frozensets(states))

        assert verify_witness(model, smaller_pre, looser_mid, bigger_goal, plan)

    def test_one_step_through_mid(self):
        """Test a long-only plan implies a one-step plan into mid."""
        import random

        from khm_toolkit.checker import synthesize
        from khm_toolkit.countermodel import random_model

        checked = 0
        for seed in range(3000):
            rng = random.Random(seed)
            model = random_model(rng.randint(2, 6), rng.randint(1, 3), 0.35, (), 0.0, seed)
            pre, mid, goal = (
                {s for s in model.states if rng.random() < 0.4} for _ in range(3)
            )
            plan = synthesize(model, pre, mid, goal)
            if plan is None or len(plan) < 2:
                continue
            assert synthesize(model, pre, set(), goal) is None

            first = synthesize(model, pre, set(), mid)
            assert first is not None and len(first) <= 1
            checked += 1

        assert checked >= 5


class TestModalLaws:
    """Property tests of the global modalities."""

    @PROPERTY_SETTINGS
    @given(models(), formulas())
    def test_khm_and_u_are_global(self, model, f):
        """Test Khm and U formulas have the same value at every state."""
        from khm_toolkit.checker import extension
        from khm_toolkit.syntax import Khm, Univ, subformulas

        for node in subformulas(f):
            if isinstance(node, (Khm, Univ)):
                assert extension(model, node) in (frozenset(), frozenset(model.states))

    @PROPERTY_SETTINGS
    @given(models(), formulas())
    def test_u_matches_its_definition(self, model, f):
        """Test U(f) agrees with Khm(!f, true, false)."""
        from khm_toolkit.checker import evaluate
        from khm_toolkit.syntax import BOT, TOP, Khm, Neg, Univ

        for s in model.states:
            assert evaluate(model, s, Univ(f)) == evaluate(model, s, Khm(Neg(f), TOP, BOT))

    @PROPERTY_SETTINGS
    @given(models(), formulas())
    def test_epsilon_law(self, model, f):
        """Test Khm(f, false, f) always holds via the empty plan."""
        from khm_toolkit.checker import valid_on
        from khm_toolkit.syntax import BOT, Khm

        assert valid_on(model, Khm(f, BOT, f))
