"""
Hilbert-style proof kernel for the knowing-how system.

Axioms are schema templates over the letters ``p, q, r, o, p', o', q'``; the
rules are modus ponens, necessitation for U and single-letter uniform
substitution. A derivation is checked line by line against a theorem
database that only ever grows with checked conclusions.
"""

import hashlib
import json
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterator, List, Mapping, Optional, Tuple, Union

from .errors import DerivationFormatError, FormulaSyntaxError, UnknownSchema
from .syntax import (
    And,
    Atom,
    Bot,
    Formula,
    Neg,
    Top,
    Univ,
    implies,
    letters,
    parse,
    render,
    subformulas,
    substitute,
    substitute_all,
)

if TYPE_CHECKING:
    from .proof_cache import ProofCache

logger = logging.getLogger(__name__)


# ============================================================================
# Axiom schemas
# ============================================================================

@dataclass(frozen=True)
class AxiomSchema:
    name: str
    template: Formula

    @property
    def letters(self):
        return letters(self.template)


def _schemas(texts: Mapping[str, str]) -> Dict[str, AxiomSchema]:
    return {name: AxiomSchema(name, parse(text)) for name, text in texts.items()}


AXIOM_TEXTS = {
    "DISTU": "U(p) & U(p -> q) -> U(q)",
    "TU": "U(p) -> p",
    "4KhmU": "Khm(p, o, q) -> U(Khm(p, o, q))",
    "5KhmU": "!Khm(p, o, q) -> U(!Khm(p, o, q))",
    "EMPKhm": "U(p -> q) -> Khm(p, false, q)",
    "COMPKhm": "Khm(p, o, r) & Khm(r, o, q) & U(r -> o) -> Khm(p, o, q)",
    "ONEKhm": "Khm(p, o, q) & !Khm(p, false, q) -> Khm(p, false, o)",
    "UKhm": "U(p' -> p) & U(o -> o') & U(q -> q') & Khm(p, o, q) -> Khm(p', o', q')",
}

# U is a primitive node here, so its defining equivalence is admitted as an axiom
DEFINITION_TEXTS = {
    "UDEF": "U(p) <-> Khm(!p, true, false)",
}

DERIVED_TEXTS = {
    "4U": "U(p) -> U(U(p))",
    "5U": "!U(p) -> U(!U(p))",
    "UNIV": "U(!p) -> Khm(p, false, false)",
    "ULKhm": "U(p' -> p) & Khm(p, o, q) -> Khm(p', o, q)",
    "UMKhm": "U(o -> o') & Khm(p, o, q) -> Khm(p, o', q)",
    "URKhm": "U(q -> q') & Khm(p, o, q) -> Khm(p, o, q')",
    "EMPKh": "U(p -> q) -> Kh(p, q)",
    "COMPKh": "Kh(p, q) & Kh(q, r) -> Kh(p, r)",
    "UKh": "U(p' -> p) & U(q -> q') & Kh(p, q) -> Kh(p', q')",
}

SCHEMAS = _schemas(AXIOM_TEXTS)
DEFINITIONS = _schemas(DEFINITION_TEXTS)
DERIVED_SCHEMAS = _schemas(DERIVED_TEXTS)

SCHEMA_LETTERS = ("p", "q", "r", "o", "p'", "o'", "q'")


def get_schema(name: str) -> AxiomSchema:
    """
    Look up an axiom or definitional schema.

    Raises:
        UnknownSchema: If no such schema exists
    """
    schema = SCHEMAS.get(name) or DEFINITIONS.get(name)
    if schema is None:
        raise UnknownSchema(f"Unknown axiom schema {name!r}")
    return schema


def instantiate(schema: Union[str, AxiomSchema], mapping: Mapping[str, Formula]) -> Formula:
    """
    Simultaneously substitute ``mapping`` into a schema template.

    Raises:
        UnknownSchema: Unknown schema name
        ValueError: ``mapping`` names a letter the template does not use
    """
    if isinstance(schema, str):
        schema = get_schema(schema)
    extra = set(mapping) - schema.letters
    if extra:
        raise ValueError(f"{schema.name} has no letters {sorted(extra)}")
    return substitute_all(schema.template, mapping)


def _fresh_names(avoid: set, count: int) -> Iterator[str]:
    index = 0
    produced = 0
    while produced < count:
        name = f"v{index}_"
        index += 1
        if name not in avoid:
            produced += 1
            yield name


def sequential_instance(template: Formula, mapping: Mapping[str, Formula]) -> Formula:
    """
    Simultaneous substitution computed as a chain of single-letter SUB steps.

    Each mapped letter is first renamed to a fresh letter, then each fresh
    letter is replaced by its target, so later steps never touch letters
    introduced by earlier ones.
    """
    avoid = set(letters(template))
    for value in mapping.values():
        avoid |= letters(value)
    order = sorted(mapping)
    fresh = dict(zip(order, _fresh_names(avoid, len(order))))

    result = template
    for letter in order:
        result = substitute(result, letter, Atom(fresh[letter]))
    for letter in order:
        result = substitute(result, fresh[letter], mapping[letter])
    return result


# ============================================================================
# Propositional tautologies
# ============================================================================

def _boolean_skeleton(f: Formula) -> List[Formula]:
    """Maximal non-Boolean subformulas, in first-occurrence order."""
    found: Dict[Formula, None] = {}
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Neg):
            stack.append(node.body)
        elif isinstance(node, And):
            stack.append(node.right)
            stack.append(node.left)
        elif not isinstance(node, (Top, Bot)):
            found.setdefault(node, None)
    return list(found)


def is_tautology(f: Formula) -> bool:
    """
    Propositional validity with atoms, Khm and U subformulas treated as opaque letters.

    All rows of the truth table are evaluated at once: row ``r`` is bit ``r``
    of an integer, and the column of variable ``i`` has bit ``r`` set iff bit
    ``i`` of ``r`` is set.
    """
    variables = _boolean_skeleton(f)
    rows = 1 << len(variables)
    full = (1 << rows) - 1

    columns: Dict[Formula, int] = {}
    for i, var in enumerate(variables):
        period = 1 << (i + 1)
        block = ((1 << (1 << i)) - 1) << (1 << i)
        columns[var] = block * (full // ((1 << period) - 1))

    values: Dict[Formula, int] = {}
    for node in subformulas(f):
        if isinstance(node, Top):
            values[node] = full
        elif isinstance(node, Bot):
            values[node] = 0
        elif isinstance(node, Neg):
            values[node] = full & ~values[node.body]
        elif isinstance(node, And):
            values[node] = values[node.left] & values[node.right]
        else:
            # letters below an opaque node get no column
            values[node] = columns.get(node, 0)

    return values[f] == full


# ============================================================================
# Derivations
# ============================================================================

@dataclass(frozen=True)
class Taut:
    pass


@dataclass(frozen=True)
class Axiom:
    name: str


@dataclass(frozen=True)
class AxiomInst:
    name: str
    mapping: Tuple[Tuple[str, Formula], ...]

    @classmethod
    def of(cls, name: str, mapping: Mapping[str, Formula]) -> "AxiomInst":
        return cls(name, tuple(sorted(mapping.items())))


@dataclass(frozen=True)
class MP:
    """Modus ponens: line ``major`` is ``line minor -> current``."""
    minor: int
    major: int


@dataclass(frozen=True)
class NECU:
    line: int


@dataclass(frozen=True)
class SUB:
    line: int
    letter: str
    replacement: Formula


@dataclass(frozen=True)
class TheoremRef:
    name: str


Justification = Union[Taut, Axiom, AxiomInst, MP, NECU, SUB, TheoremRef]


@dataclass(frozen=True)
class DerivationLine:
    formula: Formula
    just: Justification


@dataclass(frozen=True)
class Derivation:
    name: str
    lines: Tuple[DerivationLine, ...]

    @property
    def conclusion(self) -> Formula:
        return self.lines[-1].formula


class Reason(str, Enum):
    """Machine-readable rejection reasons."""
    BAD_MP_SHAPE = "bad-mp-shape"
    NOT_A_TAUTOLOGY = "not-a-tautology"
    SCHEMA_MISMATCH = "schema-mismatch"
    UNKNOWN_SCHEMA = "unknown-schema"
    UNKNOWN_THEOREM = "unknown-theorem"
    THEOREM_MISMATCH = "theorem-mismatch"
    FORWARD_REFERENCE = "forward-reference"
    BAD_NECU = "bad-necu"
    BAD_SUB = "bad-sub"
    EMPTY_DERIVATION = "empty-derivation"


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    line: Optional[int] = None
    reason: Optional[Reason] = None
    detail: str = ""

    def to_dict(self) -> dict:
        if self.ok:
            return {"ok": True}
        return {
            "ok": False,
            "line": self.line,
            "reason": self.reason.value if self.reason else None,
            "detail": self.detail,
        }


class TheoremDB:
    """
    Name to formula map of checked conclusions.

    Registration takes a lock; reads do not.
    """

    def __init__(self):
        self._theorems: Dict[str, Formula] = {}
        self._lock = threading.Lock()

    def get(self, name: str) -> Optional[Formula]:
        return self._theorems.get(name)

    def register(self, name: str, formula: Formula) -> None:
        with self._lock:
            self._theorems[name] = formula
        logger.debug(f"Registered theorem {name}")

    def __contains__(self, name: str) -> bool:
        return name in self._theorems

    def __len__(self) -> int:
        return len(self._theorems)

    def names(self) -> List[str]:
        return list(self._theorems)


def _ref_ok(index: int, current: int) -> bool:
    return 1 <= index < current


def _check_line(
    lines: Tuple[DerivationLine, ...],
    n: int,
    db: TheoremDB,
) -> Optional[Tuple[Reason, str]]:
    line = lines[n - 1]
    f = line.formula
    just = line.just

    def earlier(index: int) -> Formula:
        return lines[index - 1].formula

    if isinstance(just, Taut):
        if not is_tautology(f):
            return Reason.NOT_A_TAUTOLOGY, render(f)
        return None

    if isinstance(just, (Axiom, AxiomInst)):
        try:
            schema = get_schema(just.name)
        except UnknownSchema as e:
            return Reason.UNKNOWN_SCHEMA, str(e)
        if isinstance(just, Axiom):
            expected = schema.template
        else:
            mapping = dict(just.mapping)
            extra = set(mapping) - schema.letters
            if extra:
                return Reason.SCHEMA_MISMATCH, f"{schema.name} has no letters {sorted(extra)}"
            expected = sequential_instance(schema.template, mapping)
        if f != expected:
            return Reason.SCHEMA_MISMATCH, f"expected {render(expected)}"
        return None

    if isinstance(just, MP):
        for index in (just.minor, just.major):
            if not _ref_ok(index, n):
                return Reason.FORWARD_REFERENCE, f"line {index}"
        if earlier(just.major) != implies(earlier(just.minor), f):
            return Reason.BAD_MP_SHAPE, f"line {just.major} is not line {just.minor} -> current"
        return None

    if isinstance(just, NECU):
        if not _ref_ok(just.line, n):
            return Reason.FORWARD_REFERENCE, f"line {just.line}"
        if f != Univ(earlier(just.line)):
            return Reason.BAD_NECU, f"expected U({render(earlier(just.line))})"
        return None

    if isinstance(just, SUB):
        if not _ref_ok(just.line, n):
            return Reason.FORWARD_REFERENCE, f"line {just.line}"
        expected = substitute(earlier(just.line), just.letter, just.replacement)
        if f != expected:
            return Reason.BAD_SUB, f"expected {render(expected)}"
        return None

    if isinstance(just, TheoremRef):
        stored = db.get(just.name)
        if stored is None:
            return Reason.UNKNOWN_THEOREM, just.name
        if stored != f:
            return Reason.THEOREM_MISMATCH, f"{just.name} is {render(stored)}"
        return None

    raise TypeError(f"Unknown justification {just!r}")


def check_derivation(d: Derivation, db: TheoremDB, register: bool = True) -> CheckResult:
    """
    Check every line of ``d``.

    Args:
        d: The derivation
        db: Theorems available to ``theorem`` lines
        register: Store the conclusion under ``d.name`` when the check passes

    Returns:
        ``CheckResult(ok=True)``, or the first failing 1-based line with its reason
    """
    if not d.lines:
        return CheckResult(False, 0, Reason.EMPTY_DERIVATION, "no lines")

    for n in range(1, len(d.lines) + 1):
        failure = _check_line(d.lines, n, db)
        if failure is not None:
            reason, detail = failure
            logger.info(f"Derivation {d.name} rejected at line {n}: {reason.value} ({detail})")
            return CheckResult(False, n, reason, detail)

    if register:
        db.register(d.name, d.conclusion)
    return CheckResult(True)


# ============================================================================
# Derivation files
# ============================================================================

def _formula(text: Any, where: str) -> Formula:
    if not isinstance(text, str):
        raise DerivationFormatError(f"{where}: formula must be a string")
    try:
        return parse(text)
    except FormulaSyntaxError as e:
        raise DerivationFormatError(f"{where}: {e}") from e


def _index(value: Any, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DerivationFormatError(f"{where}: line references must be integers")
    return value


def _justification(raw: Any, where: str) -> Justification:
    if not isinstance(raw, dict) or not isinstance(raw.get("kind"), str):
        raise DerivationFormatError(f'{where}: "just" must be an object with a "kind"')
    kind = raw["kind"]
    try:
        if kind == "taut":
            return Taut()
        if kind == "axiom":
            return Axiom(str(raw["schema"]))
        if kind == "axiom_inst":
            mapping = raw["map"]
            if not isinstance(mapping, dict):
                raise DerivationFormatError(f'{where}: "map" must be an object')
            return AxiomInst.of(
                str(raw["schema"]),
                {letter: _formula(text, where) for letter, text in mapping.items()},
            )
        if kind == "mp":
            refs = raw["lines"]
            if not isinstance(refs, list) or len(refs) != 2:
                raise DerivationFormatError(f'{where}: "lines" must be [i, j]')
            return MP(_index(refs[0], where), _index(refs[1], where))
        if kind == "necu":
            return NECU(_index(raw["line"], where))
        if kind == "sub":
            return SUB(
                _index(raw["line"], where),
                str(raw["letter"]),
                _formula(raw["with"], where),
            )
        if kind == "theorem":
            return TheoremRef(str(raw["name"]))
    except KeyError as e:
        raise DerivationFormatError(f"{where}: missing field {e}") from None
    raise DerivationFormatError(f"{where}: unknown justification kind {kind!r}")


def derivation_from_dict(doc: Any) -> Derivation:
    """Decode a derivation document."""
    if not isinstance(doc, dict):
        raise DerivationFormatError("Derivation must be a JSON object")
    name = doc.get("name")
    raw_lines = doc.get("lines")
    if not isinstance(name, str) or not isinstance(raw_lines, list):
        raise DerivationFormatError('Derivation needs a "name" string and a "lines" list')

    lines = []
    for n, raw in enumerate(raw_lines, start=1):
        where = f"{name} line {n}"
        if not isinstance(raw, dict):
            raise DerivationFormatError(f"{where}: must be an object")
        formula = _formula(raw.get("formula"), where)
        lines.append(DerivationLine(formula, _justification(raw.get("just"), where)))
    return Derivation(name, tuple(lines))


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DerivationFormatError(f"{path}: not valid JSON: {e}") from None


def load_derivation(source: Union[str, Path, Mapping]) -> Derivation:
    """Load a derivation from a file path or an already decoded document."""
    if isinstance(source, Mapping):
        return derivation_from_dict(dict(source))
    return derivation_from_dict(_read_json(Path(source)))


# ============================================================================
# Corpus
# ============================================================================

@dataclass(frozen=True)
class CorpusEntry:
    path: Path
    name: str
    result: CheckResult
    cached: bool = False


def corpus_files(manifest: Union[str, Path]) -> List[Path]:
    """Files listed by a corpus manifest, resolved against its directory."""
    manifest = Path(manifest)
    doc = _read_json(manifest)
    files = doc.get("files") if isinstance(doc, dict) else None
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise DerivationFormatError(f'{manifest}: needs a "files" list of paths')
    return [manifest.parent / f for f in files]


def cited_theorems(d: Derivation) -> List[str]:
    """Names of the theorems a derivation cites, in first-use order."""
    names: Dict[str, None] = {}
    for line in d.lines:
        if isinstance(line.just, TheoremRef):
            names.setdefault(line.just.name, None)
    return list(names)


def _cites_hold(cites: Mapping[str, str], db: TheoremDB) -> bool:
    for name, text in cites.items():
        proved = db.get(name)
        if proved is None or render(proved) != text:
            return False
    return True


def check_corpus(
    manifest: Union[str, Path],
    db: TheoremDB,
    cache: Optional["ProofCache"] = None,
) -> List[CorpusEntry]:
    """
    Check the manifest's derivations in order, registering each conclusion.

    With a cache, a file whose content digest was checked before has its
    theorem re-registered without re-checking, provided every theorem it cited
    is already in ``db`` with the recorded conclusion. Otherwise the file is
    checked in full.
    """
    entries = []
    for path in corpus_files(manifest):
        raw = path.read_bytes()
        digest = hashlib.sha256(raw).hexdigest()

        if cache is not None:
            hit = cache.lookup(digest)
            if hit is not None and _cites_hold(hit.cites, db):
                db.register(hit.name, parse(hit.formula))
                entries.append(CorpusEntry(path, hit.name, CheckResult(True), cached=True))
                continue
            if hit is not None:
                logger.debug(f"{path.name}: cited theorems changed; checking in full")

        try:
            doc = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise DerivationFormatError(f"{path}: not valid JSON: {e}") from None
        derivation = derivation_from_dict(doc)
        result = check_derivation(derivation, db)
        entries.append(CorpusEntry(path, derivation.name, result))
        if result.ok and cache is not None:
            cites = {name: render(db.get(name)) for name in cited_theorems(derivation)}
            cache.record(digest, derivation.name, render(derivation.conclusion), cites)
    return entries
