"""
Command-line front end.

Exit codes: 0 for a positive answer, 1 for a negative answer (formula false,
no plan, derivation rejected, no countermodel), 2 for usage or input errors.
Results go to stdout; diagnostics and logs go to stderr.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from pythonjsonlogger import jsonlogger

from .checker import evaluator_for
from .config import Config, ensure_directories, load_config
from .countermodel import SearchBounds, find_countermodel
from .errors import BudgetExceeded, KhmError
from .fuzzer import ModelParams, fuzz_soundness
from .model import dump_model, format_plan, load_model_file, model_to_json, plan_to_text
from .proof_cache import ProofCache
from .proofs import TheoremDB, check_corpus, check_derivation, load_derivation
from .syntax import Formula, Khm, letters, parse, render, subformulas

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class CommandResult:
    exit_code: int
    payload: str


class _Style:
    """ANSI highlighting of verdicts, enabled only for terminals."""

    def __init__(self, enabled: bool):
        self.enabled = enabled

    def _wrap(self, code: str, text: str) -> str:
        return f"\033[{code}m{text}\033[0m" if self.enabled else text

    def good(self, text: str) -> str:
        return self._wrap("32", text)

    def bad(self, text: str) -> str:
        return self._wrap("31", text)

    def verdict(self, value: bool) -> str:
        return self.good("true") if value else self.bad("false")


def setup_logging(config: Config, level: Optional[str] = None) -> None:
    """
    Configure logging for the command-line tools.

    Args:
        config: Application configuration
        level: Overrides the configured level
    """
    ensure_directories(config)

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.log.file_path is not None:
        handlers.append(logging.FileHandler(config.log.file_path))

    if config.log.format == "json":
        formatter: logging.Formatter = jsonlogger.JsonFormatter(LOG_FORMAT)
    else:
        formatter = logging.Formatter(LOG_FORMAT)
    for handler in handlers:
        handler.setFormatter(formatter)

    logging.basicConfig(
        level=getattr(logging, level or config.log.level),
        handlers=handlers,
        force=True,
    )


# ============================================================================
# Argument parsing
# ============================================================================

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--json",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Emit JSON instead of human-readable text",
    )
    common.add_argument(
        "--config", "-c",
        default=argparse.SUPPRESS,
        help="Path to .env configuration file",
    )
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=argparse.SUPPRESS,
        help="Override KHM_LOG_LEVEL",
    )

    parser = argparse.ArgumentParser(
        prog="khm",
        description="Model checking, planning and proof checking for knowing-how logic",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="Parse and pretty-print a formula")
    p.add_argument("formula", help="Formula text, or @FILE")

    p = sub.add_parser("check", parents=[common], help="Evaluate a formula on a model")
    p.add_argument("model", help="Model JSON file")
    p.add_argument("formula", help="Formula text, or @FILE")
    p.add_argument("--state", help="Evaluate at this state only")

    p = sub.add_parser("plan", parents=[common], help="Synthesize a uniform plan")
    p.add_argument("model", help="Model JSON file")
    p.add_argument("--pre", required=True, help="Start condition")
    p.add_argument("--mid", default="true", help="Condition on intermediate states")
    p.add_argument("--post", required=True, help="Goal condition")

    p = sub.add_parser("prove", parents=[common], help="Check a derivation")
    p.add_argument("derivation", help="Derivation JSON file")
    p.add_argument("--manifest", help="Corpus manifest to check and load first")
    p.add_argument("--cache", help="Proof cache file for the corpus")

    p = sub.add_parser("countermodel", parents=[common], help="Search for a falsifying model")
    p.add_argument("formula", help="Formula text, or @FILE")
    p.add_argument("--max-states", type=_positive_int, default=4)
    p.add_argument("--max-actions", type=_positive_int, default=3)
    p.add_argument("--max-plan-len", type=_positive_int, default=None)
    p.add_argument("--budget", type=_positive_int, default=None,
                   help="Candidate models to examine (default: KHM_COUNTERMODEL_BUDGET)")

    p = sub.add_parser("fuzz", parents=[common], help="Randomised soundness check")
    p.add_argument("--trials", type=_positive_int, default=None)
    p.add_argument("--seed", type=_non_negative_int, default=None)
    p.add_argument("--max-states", type=_positive_int, default=ModelParams.max_states)
    p.add_argument("--max-actions", type=_positive_int, default=ModelParams.max_actions)
    p.add_argument("--edge-prob", type=_probability, default=ModelParams.edge_prob)
    p.add_argument("--prop-prob", type=_probability, default=ModelParams.prop_prob)
    p.add_argument("--depth", type=_non_negative_int, default=ModelParams.depth)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--derived", action="store_true",
                   help="Also check the definitional and derived schemas")

    return parser


def read_formula(text: str) -> Formula:
    """Parse inline text, or the contents of FILE for ``@FILE``."""
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8").strip()
    return parse(text)


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


# ============================================================================
# Commands
# ============================================================================

def cmd_parse(args, config: Config, style: _Style) -> CommandResult:
    f = read_formula(args.formula)
    if args.json:
        return CommandResult(EXIT_OK, _dumps({"formula": render(f), "letters": sorted(letters(f))}))
    return CommandResult(EXIT_OK, render(f))


def cmd_check(args, config: Config, style: _Style) -> CommandResult:
    model = load_model_file(args.model)
    f = read_formula(args.formula)
    evaluator = evaluator_for(model)

    if args.state is not None:
        states = {args.state: evaluator.holds(args.state, f)}
    else:
        states = {s: evaluator.holds(s, f) for s in model.states}
    value = all(states.values())

    witnesses = []
    for node in subformulas(f):
        if isinstance(node, Khm):
            plan = evaluator.witness(node)
            if plan is not None:
                witnesses.append((node, plan))

    exit_code = EXIT_OK if value else EXIT_NEGATIVE
    if args.json:
        doc = {
            "formula": render(f),
            "state": args.state,
            "value": value,
            "states": states,
            "witnesses": [
                {"formula": render(n), "plan": plan_to_text(p, model.alphabet)}
                for n, p in witnesses
            ],
        }
        return CommandResult(exit_code, _dumps(doc))

    lines = []
    if args.state is not None:
        lines.append(style.verdict(value))
    else:
        width = max(len(s) for s in states)
        lines.extend(f"{s.ljust(width)}  {style.verdict(v)}" for s, v in states.items())
    for node, plan in witnesses:
        lines.append(f"witness {render(node)}: {format_plan(plan, model.alphabet)}")
    return CommandResult(exit_code, "\n".join(lines))


def cmd_plan(args, config: Config, style: _Style) -> CommandResult:
    model = load_model_file(args.model)
    pre, mid, post = (read_formula(t) for t in (args.pre, args.mid, args.post))
    evaluator = evaluator_for(model)
    plan = evaluator.plan_for(evaluator.mask(pre), evaluator.mask(mid), evaluator.mask(post))

    exit_code = EXIT_OK if plan is not None else EXIT_NEGATIVE
    if args.json:
        doc = {
            "plan": None if plan is None else plan_to_text(plan, model.alphabet),
            "length": None if plan is None else len(plan),
        }
        return CommandResult(exit_code, _dumps(doc))
    if plan is None:
        return CommandResult(exit_code, style.bad("no plan"))
    return CommandResult(exit_code, format_plan(plan, model.alphabet))


def cmd_prove(args, config: Config, style: _Style) -> CommandResult:
    manifest = args.manifest or config.proof.corpus_manifest
    cache_path = args.cache or config.proof.cache_path
    db = TheoremDB()

    if manifest:
        cache = ProofCache(Path(cache_path)) if cache_path else None
        for entry in check_corpus(manifest, db, cache):
            if not entry.result.ok:
                r = entry.result
                message = f"corpus {entry.path} rejected at line {r.line}: {r.reason.value}"
                if args.json:
                    doc = {"corpus": str(entry.path), **r.to_dict()}
                    return CommandResult(EXIT_NEGATIVE, _dumps(doc))
                return CommandResult(EXIT_NEGATIVE, style.bad(message))

    derivation = load_derivation(args.derivation)
    result = check_derivation(derivation, db)
    exit_code = EXIT_OK if result.ok else EXIT_NEGATIVE

    if args.json:
        doc = {"name": derivation.name, **result.to_dict()}
        if result.ok:
            doc["theorem"] = render(derivation.conclusion)
        return CommandResult(exit_code, _dumps(doc))
    if result.ok:
        proved = f"{derivation.name} proves {render(derivation.conclusion)}"
        return CommandResult(exit_code, f"{style.good('ok')}: {proved}")
    message = f"rejected at line {result.line}: {result.reason.value}"
    if result.detail:
        message += f" ({result.detail})"
    return CommandResult(exit_code, style.bad(message))


def cmd_countermodel(args, config: Config, style: _Style) -> CommandResult:
    f = read_formula(args.formula)
    bounds = SearchBounds(args.max_states, args.max_actions, args.max_plan_len)
    budget = args.budget or config.search.countermodel_budget

    try:
        found = find_countermodel(f, bounds, budget=budget)
    except BudgetExceeded as e:
        if args.json:
            return CommandResult(
                EXIT_NEGATIVE, _dumps({"status": "budget-exhausted", "examined": e.examined})
            )
        message = f"budget exhausted after {e.examined} candidates"
        return CommandResult(EXIT_NEGATIVE, style.bad(message))

    if found is None:
        if args.json:
            return CommandResult(EXIT_NEGATIVE, _dumps({"status": "none-within-bounds"}))
        return CommandResult(EXIT_NEGATIVE, "none within bounds")

    model, state = found
    if args.json:
        doc = {"status": "found", "state": state, "model": dump_model(model)}
        return CommandResult(EXIT_OK, _dumps(doc))
    return CommandResult(EXIT_OK, f"countermodel, false at {state}:\n{model_to_json(model)}")


def cmd_fuzz(args, config: Config, style: _Style) -> CommandResult:
    params = ModelParams(
        max_states=args.max_states,
        max_actions=args.max_actions,
        edge_prob=args.edge_prob,
        prop_prob=args.prop_prob,
        depth=args.depth,
    )
    report = fuzz_soundness(
        trials=args.trials if args.trials is not None else config.search.fuzz_trials,
        model_params=params,
        seed=args.seed if args.seed is not None else config.search.fuzz_seed,
        workers=args.workers or config.search.fuzz_workers,
        derived=args.derived,
    )

    exit_code = EXIT_OK if report.ok else EXIT_NEGATIVE
    if args.json:
        return CommandResult(exit_code, _dumps(report.to_dict()))
    summary = (
        f"seed {report.seed}: {report.trials} trials, {report.instances} instances, "
        f"{len(report.failures)} failures"
    )
    lines = [style.good(summary) if report.ok else style.bad(summary)]
    lines.extend(json.dumps(failure.to_dict(), sort_keys=True) for failure in report.failures)
    return CommandResult(exit_code, "\n".join(lines))


COMMANDS = {
    "parse": cmd_parse,
    "check": cmd_check,
    "plan": cmd_plan,
    "prove": cmd_prove,
    "countermodel": cmd_countermodel,
    "fuzz": cmd_fuzz,
}


def run(argv: Optional[Sequence[str]] = None) -> CommandResult:
    """Parse ``argv`` and run the selected command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else EXIT_USAGE
        return CommandResult(code, "")
    args.json = getattr(args, "json", False)

    try:
        config = load_config(getattr(args, "config", None))
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return CommandResult(EXIT_USAGE, "")

    setup_logging(config, getattr(args, "log_level", None))
    style = _Style(config.output.color == "auto" and not args.json and sys.stdout.isatty())

    try:
        return COMMANDS[args.command](args, config, style)
    except (KhmError, OSError, ValueError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return CommandResult(EXIT_USAGE, "")
    except RecursionError:
        logger.debug(f"{args.command} failed", exc_info=True)
        print("error: formula is nested too deeply", file=sys.stderr)
        return CommandResult(EXIT_USAGE, "")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the ``khm`` command."""
    result = run(argv)
    if result.payload:
        print(result.payload)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
