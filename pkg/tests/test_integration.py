"""
Integration tests for the knowing-how toolkit.

These tests run the end-to-end scenarios: the fixture models, the full
soundness fuzz, planner and oracle agreement on random models, the
countermodel for chaining plans, and the derivation corpus.
"""

import json
import random

import pytest

from tests.conftest import CHAINING_FORMULA, MANIFEST


@pytest.mark.integration
class TestFixtureModels:
    """End-to-end checks on the shipped models."""

    def test_chain_model_needs_two_steps(self, m1):
        """Test Kh(p, q) is witnessed by ru and by nothing shorter."""
        from khm_toolkit.checker import brute_force, evaluator_for, extension
        from khm_toolkit.syntax import parse

        f = parse("Kh(p, q)")
        p, q = extension(m1, parse("p")), extension(m1, parse("q"))

        assert evaluator_for(m1).witness(f) == ("r", "u")
        assert brute_force(m1, p, m1.states, q, 1) is None

    def test_strong_executability(self, m2):
        """Test ab runs to s4 from s1 without being strongly executable."""
        from khm_toolkit.model import run_plan, strongly_executable

        assert strongly_executable(m2, "s1", ("a", "b")) is False
        assert run_plan(m2, "s1", ("a", "b")) == {"s4"}

    def test_branching_model(self, m3):
        """Test the witnesses a and ab and the false unconstrained formula."""
        from khm_toolkit.checker import evaluate, evaluator_for
        from khm_toolkit.syntax import parse

        evaluator = evaluator_for(m3)

        assert evaluator.witness(parse("Khm(p, false, o)")) == ("a",)
        assert evaluator.witness(parse("Khm(p, o, q)")) == ("a", "b")
        assert evaluate(m3, "s1", parse("Khm(p, false, q)")) is False


@pytest.mark.integration
@pytest.mark.slow
class TestSoundness:
    """Full-size soundness and oracle runs."""

    @pytest.mark.timeout(600)
    def test_thousand_trials(self):
        """Test 1000 seeded trials find no invalid axiom instance."""
        from khm_toolkit.fuzzer import ModelParams, fuzz_soundness

        report = fuzz_soundness(1000, ModelParams(max_states=6, max_actions=3), seed=42)

        assert report.failures == []
        assert report.instances == 8000

    @pytest.mark.timeout(300)
    def test_planner_matches_oracle(self):
        """Test synthesize and brute_force agree on 300 random models."""
        from khm_toolkit.checker import brute_force, synthesize
        from khm_toolkit.countermodel import random_model

        rng = random.Random(42)
        for trial in range(300):
            n = rng.randint(1, 5)
            model = random_model(n, rng.randint(1, 2), 0.35, [], 0.0, seed=trial)
            pre, mid, goal = (
                {s for s in model.states if rng.random() < 0.5} for _ in range(3)
            )

            planned = synthesize(model, pre, mid, goal)
            oracle = brute_force(model, pre, mid, goal, 2 ** n)

            assert (planned is None) == (oracle is None), trial
            if planned is not None:
                assert len(planned) == len(oracle), trial


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(120)
def test_chaining_countermodel_round_trip(capsys):
    """Test the emitted countermodel re-falsifies the chaining formula."""
    from khm_toolkit.checker import evaluate
    from khm_toolkit.cli import main
    from khm_toolkit.model import load_model
    from khm_toolkit.syntax import parse

    code = main(["countermodel", "--json", CHAINING_FORMULA, "--max-states", "4"])
    doc = json.loads(capsys.readouterr().out)

    assert code == 0
    model = load_model(json.dumps(doc["model"]))
    assert len(model.states) <= 4
    assert evaluate(model, doc["state"], parse(CHAINING_FORMULA)) is False


@pytest.mark.integration
def test_corpus_theorems(checked_db):
    """Test the corpus proves the U laws, the monotonicity rules and an REU instance."""
    from khm_toolkit.syntax import parse

    expected = {
        "4U": "U(p) -> U(U(p))",
        "5U": "!U(p) -> U(!U(p))",
        "UNIV": "U(!p) -> Khm(p, false, false)",
        "ULKhm": "U(p' -> p) & Khm(p, o, q) -> Khm(p', o, q)",
        "UMKhm": "U(o -> o') & Khm(p, o, q) -> Khm(p, o', q)",
        "URKhm": "U(q -> q') & Khm(p, o, q) -> Khm(p, o, q')",
        "REU_comm": "U(p & q) <-> U(q & p)",
    }
    for name, text in expected.items():
        assert checked_db.get(name) == parse(text), name
    assert len(checked_db) == len(json.loads(MANIFEST.read_text())["files"])
