"""
Randomised soundness check of the axiom schemas.

Each trial draws a model and one random formula per schema letter, then
checks that every schema instance is valid on that model. Trials are seeded
independently, so running them in worker processes gives the same report as
running them in order.
"""

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .checker import falsifying_states
from .countermodel import random_model
from .model import dump_model
from .proofs import DEFINITIONS, DERIVED_SCHEMAS, SCHEMA_LETTERS, SCHEMAS, AxiomSchema
from .syntax import letters, random_formula, render, substitute_all

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 100


@dataclass(frozen=True)
class ModelParams:
    """Shape of the random models and substitutions."""
    max_states: int = 6
    max_actions: int = 3
    edge_prob: float = 0.3
    prop_prob: float = 0.4
    depth: int = 3
    letters: Tuple[str, ...] = ("p", "q", "r")

    def __post_init__(self):
        if self.max_states < 1 or self.max_actions < 1:
            raise ValueError("max_states and max_actions must be at least 1")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        for name in ("edge_prob", "prop_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class FuzzFailure:
    """Everything needed to reproduce one invalid instance."""
    trial: int
    axiom: str
    model: dict
    substitution: Dict[str, str]
    state: str

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "axiom": self.axiom,
            "model": self.model,
            "substitution": self.substitution,
            "state": self.state,
        }


@dataclass
class FuzzReport:
    seed: int
    trials: int
    instances: int = 0
    failures: List[FuzzFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "instances": self.instances,
            "failures": [f.to_dict() for f in self.failures],
        }


def schemas_under_test(derived: bool = False) -> List[AxiomSchema]:
    chosen = list(SCHEMAS.values())
    if derived:
        chosen += list(DEFINITIONS.values()) + list(DERIVED_SCHEMAS.values())
    return chosen


def trial_seed(seed: int, trial: int) -> int:
    return seed * 1_000_003 + trial


def run_trial(
    seed: int,
    trial: int,
    params: ModelParams,
    derived: bool = False,
) -> Tuple[int, List[FuzzFailure]]:
    """
    Run one trial.

    Returns:
        Number of schema instances checked and the failures among them
    """
    rng = random.Random(trial_seed(seed, trial))
    model = random_model(
        rng.randint(1, params.max_states),
        rng.randint(1, params.max_actions),
        params.edge_prob,
        params.letters,
        params.prop_prob,
        rng.getrandbits(32),
    )
    substitution = {
        letter: random_formula(rng, params.letters, params.depth) for letter in SCHEMA_LETTERS
    }

    failures = []
    schemas = schemas_under_test(derived)
    for schema in schemas:
        used = {k: v for k, v in substitution.items() if k in letters(schema.template)}
        instance = substitute_all(schema.template, used)
        bad = falsifying_states(model, instance)
        if bad:
            failures.append(
                FuzzFailure(
                    trial=trial,
                    axiom=schema.name,
                    model=dump_model(model),
                    substitution={k: render(v) for k, v in sorted(used.items())},
                    state=bad[0],
                )
            )
    return len(schemas), failures


def fuzz_soundness(
    trials: int,
    model_params: Optional[ModelParams] = None,
    seed: int = 42,
    workers: int = 1,
    derived: bool = False,
) -> FuzzReport:
    """
    Check schema instances on ``trials`` random models.

    Args:
        trials: Number of random models
        model_params: Model and substitution shape
        seed: Base seed; trial ``i`` is seeded from ``(seed, i)``
        workers: Worker processes; results are merged in trial order
        derived: Also check the definitional and derived schemas

    Returns:
        Report whose failures are empty iff every instance was valid
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    params = model_params or ModelParams()
    report = FuzzReport(seed=seed, trials=trials)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    run_trial,
                    [seed] * trials,
                    range(trials),
                    [params] * trials,
                    [derived] * trials,
                    chunksize=max(1, trials // (workers * 4)),
                )
            )
    else:
        results = []
        for trial in range(trials):
            results.append(run_trial(seed, trial, params, derived))
            if (trial + 1) % PROGRESS_EVERY == 0:
                logger.info(f"Fuzz: {trial + 1}/{trials} trials")

    for checked, failures in results:
        report.instances += checked
        for failure in failures:
            logger.warning(
                f"Invalid instance of {failure.axiom} in trial {failure.trial} "
                f"at state {failure.state}"
            )
        report.failures.extend(failures)

    logger.info(f"Fuzz finished: {report.instances} instances, {len(report.failures)} failures")
    return report
