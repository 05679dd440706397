"""
Formula language of the ternary knowing-how logic.

Formulas are immutable dataclass trees. The concrete ASCII syntax is parsed
with a lark LALR grammar; disjunction, implication, equivalence and the binary
``Kh`` operator are sugar that the parser expands into the primitive nodes.
"""

import random
import re
from dataclasses import dataclass, fields
from typing import (
    Callable, Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple, TypeVar, Union,
)

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput

from .errors import FormulaSyntaxError

IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_']*\Z")
KEYWORDS = frozenset({"true", "false", "U", "Kh", "Khm"})


class FormulaNode:
    """
    Shared behaviour of all AST nodes.

    Hashes are computed once at construction from the children's cached
    hashes, and equality walks both trees with an explicit stack, so deeply
    nested formulas never hit the interpreter's recursion limit.
    """

    _hash: int

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((type(self).__name__, self._parts())))

    def _parts(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))  # type: ignore[arg-type]

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FormulaNode):
            return NotImplemented
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if type(a) is not type(b) or a._hash != b._hash:
                return False
            for x, y in zip(a._parts(), b._parts()):
                if isinstance(x, FormulaNode):
                    stack.append((x, y))
                elif x != y:
                    return False
        return True

    def __reduce__(self):
        # string hashes differ between processes
        return type(self), self._parts()

    def __str__(self) -> str:
        return render(self)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class Atom(FormulaNode):
    """Proposition letter."""
    name: str

    def __post_init__(self):
        if not IDENT_RE.match(self.name) or self.name in KEYWORDS:
            raise ValueError(f"Invalid proposition letter: {self.name!r}")
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class Top(FormulaNode):
    """The constant true."""


@dataclass(frozen=True, eq=False)
class Bot(FormulaNode):
    """The constant false."""


@dataclass(frozen=True, eq=False)
class Neg(FormulaNode):
    body: "Formula"


@dataclass(frozen=True, eq=False)
class And(FormulaNode):
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, eq=False)
class Khm(FormulaNode):
    """Knowing how to reach ``goal`` from ``pre`` while keeping ``mid`` in-between."""
    pre: "Formula"
    mid: "Formula"
    goal: "Formula"


@dataclass(frozen=True, eq=False)
class Univ(FormulaNode):
    """Universal modality: ``body`` holds at every state."""
    body: "Formula"


Formula = Union[Atom, Top, Bot, Neg, And, Khm, Univ]

T = TypeVar("T")

TOP = Top()
BOT = Bot()


# ============================================================================
# Defined connectives
# ============================================================================

def disj(left: Formula, right: Formula) -> Formula:
    """``left | right`` as ``!(!left & !right)``."""
    return Neg(And(Neg(left), Neg(right)))


def implies(left: Formula, right: Formula) -> Formula:
    """``left -> right`` as ``!(left & !right)``."""
    return Neg(And(left, Neg(right)))


def iff(left: Formula, right: Formula) -> Formula:
    """``left <-> right`` as the conjunction of both implications."""
    return And(implies(left, right), implies(right, left))


def kh(pre: Formula, goal: Formula) -> Formula:
    """Binary know-how: ``Khm(pre, true, goal)``."""
    return Khm(pre, TOP, goal)


def khm_inclusive(pre: Formula, mid: Formula, goal: Formula) -> Formula:
    """Knowing how with the constraint also imposed on the start and end states."""
    return Khm(And(pre, mid), mid, And(goal, mid))


def conj_all(parts: Sequence[Formula]) -> Formula:
    """Left-nested conjunction; the empty conjunction is ``true``."""
    if not parts:
        return TOP
    result = parts[0]
    for part in parts[1:]:
        result = And(result, part)
    return result


# ============================================================================
# Parsing
# ============================================================================

GRAMMAR = r"""
    ?start: formula

    ?formula: imp
        | formula "<->" imp                                 -> equivalence
    ?imp: disj
        | disj "->" imp                                     -> implication
    ?disj: conj
        | disj "|" conj                                     -> disjunction
    ?conj: unary
        | conj "&" unary                                    -> conjunction
    ?unary: primary
        | "!" unary                                         -> negation
        | "U" "(" formula ")"                               -> universal
    ?primary: "true"                                        -> top
        | "false"                                           -> bot
        | IDENT                                             -> atom
        | "Khm" "(" formula "," formula "," formula ")"     -> khm
        | "Kh" "(" formula "," formula ")"                  -> kh
        | "(" formula ")"

    IDENT: /[a-z][A-Za-z0-9_']*/

    %import common.WS
    %ignore WS
"""


@v_args(inline=True)
class _ToFormula(Transformer):
    """Builds AST nodes while the LALR parser reduces."""

    def top(self):
        return TOP

    def bot(self):
        return BOT

    def atom(self, token):
        return Atom(str(token))

    def negation(self, body):
        return Neg(body)

    def universal(self, body):
        return Univ(body)

    def conjunction(self, left, right):
        return And(left, right)

    def disjunction(self, left, right):
        return disj(left, right)

    def implication(self, left, right):
        return implies(left, right)

    def equivalence(self, left, right):
        return iff(left, right)

    def khm(self, pre, mid, goal):
        return Khm(pre, mid, goal)

    def kh(self, pre, goal):
        return kh(pre, goal)


_PARSER = Lark(GRAMMAR, parser="lalr", transformer=_ToFormula())

_TERMINAL_NAMES = {"IDENT": "identifier", "$END": "end of input"}


def _describe_terminal(name: str) -> str:
    if name in _TERMINAL_NAMES:
        return _TERMINAL_NAMES[name]
    try:
        return f'"{_PARSER.get_terminal(name).pattern.value}"'
    except KeyError:
        return name


def _syntax_error(text: str, exc: UnexpectedInput) -> FormulaSyntaxError:
    pos = getattr(exc, "pos_in_stream", None)
    token = getattr(exc, "token", None)
    if pos is None or pos < 0 or getattr(token, "type", None) == "$END":
        pos = len(text)
    names = getattr(exc, "expected", None) or getattr(exc, "allowed", None) or ()
    offset = len(text[:pos].encode("utf-8"))
    if pos >= len(text):
        message = "Unexpected end of input"
    else:
        message = f"Unexpected {text[pos]!r}"
    return FormulaSyntaxError(message, offset, {_describe_terminal(n) for n in names})


def parse(text: str) -> Formula:
    """
    Parse surface syntax into a formula.

    Args:
        text: Formula in the ASCII syntax (``!``, ``&``, ``|``, ``->``, ``<->``,
            ``true``, ``false``, ``U(...)``, ``Kh(...)``, ``Khm(...)``)

    Returns:
        The desugared AST

    Raises:
        FormulaSyntaxError: With the byte offset and the expected tokens
    """
    try:
        return _PARSER.parse(text)
    except UnexpectedInput as exc:
        raise _syntax_error(text, exc) from None


def children(f: Formula) -> Tuple[Formula, ...]:
    """Immediate subformulas, left to right."""
    if isinstance(f, (Atom, Top, Bot)):
        return ()
    if isinstance(f, (Neg, Univ)):
        return (f.body,)
    if isinstance(f, And):
        return (f.left, f.right)
    if isinstance(f, Khm):
        return (f.pre, f.mid, f.goal)
    raise TypeError(f"Not a formula: {f!r}")


def _post_order(f: Formula, build: Callable[[Formula, List[T]], T]) -> T:
    # explicit stack; results are keyed by node identity for this walk only
    done: Dict[int, T] = {}
    stack: List[Tuple[Formula, bool]] = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in done:
            continue
        kids = children(node)
        if not expanded:
            stack.append((node, True))
            stack.extend((kid, False) for kid in reversed(kids))
            continue
        done[id(node)] = build(node, [done[id(kid)] for kid in kids])
    return done[id(f)]


# ============================================================================
# Printing
# ============================================================================

def _render_node(f: Formula, parts: List[str]) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Neg):
        if isinstance(f.body, And):
            return f"!({parts[0]})"
        return f"!{parts[0]}"
    if isinstance(f, And):
        left, right = parts
        # & is left-associative
        if isinstance(f.right, And):
            right = f"({right})"
        return f"{left} & {right}"
    if isinstance(f, Univ):
        return f"U({parts[0]})"
    pre, mid, goal = parts
    if f.mid == TOP:
        return f"Kh({pre}, {goal})"
    return f"Khm({pre}, {mid}, {goal})"


def render(f: Formula) -> str:
    """
    Print a formula with minimal parentheses.

    Only ``Kh`` is re-sugared; negated conjunctions stay as written by the
    desugaring, so ``parse(render(f)) == f`` holds for every formula.
    """
    return _post_order(f, _render_node)


# ============================================================================
# Structural operations
# ============================================================================

def letters(f: Formula) -> FrozenSet[str]:
    """Names of the proposition letters occurring in ``f``."""
    found = set()
    stack: List[Formula] = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            found.add(node.name)
        else:
            stack.extend(children(node))
    return frozenset(found)


def substitute_all(f: Formula, mapping: Mapping[str, Formula]) -> Formula:
    """Replace every listed letter simultaneously."""

    def rebuild(node: Formula, parts: List[Formula]) -> Formula:
        if isinstance(node, Atom):
            return mapping.get(node.name, node)
        if not parts:
            return node
        return type(node)(*parts)

    return _post_order(f, rebuild)


def substitute(f: Formula, letter: str, replacement: Formula) -> Formula:
    """``f[replacement/letter]``."""
    return substitute_all(f, {letter: replacement})


def subformulas(f: Formula) -> List[Formula]:
    """Distinct subformulas of ``f`` in post-order (children before parents)."""
    order: List[Formula] = []
    seen: Dict[Formula, None] = {}
    stack: List[Tuple[Formula, bool]] = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if node in seen:
            continue
        if not expanded:
            stack.append((node, True))
            stack.extend((kid, False) for kid in reversed(children(node)))
            continue
        seen[node] = None
        order.append(node)
    return order


def random_formula(
    rng: random.Random,
    names: Iterable[str] = ("p", "q", "r"),
    depth: int = 3,
) -> Formula:
    """
    Draw a formula of nesting depth at most ``depth``.

    Every primitive node kind can appear, so generated formulas exercise all
    evaluator clauses.
    """
    pool = tuple(names)
    if depth <= 0 or rng.random() < 0.25:
        roll = rng.random()
        if roll < 0.1 or not pool:
            return TOP
        if roll < 0.2:
            return BOT
        return Atom(rng.choice(pool))

    kind = rng.choice(("neg", "and", "khm", "univ"))
    if kind == "neg":
        return Neg(random_formula(rng, pool, depth - 1))
    if kind == "and":
        return And(random_formula(rng, pool, depth - 1), random_formula(rng, pool, depth - 1))
    if kind == "univ":
        return Univ(random_formula(rng, pool, depth - 1))
    return Khm(
        random_formula(rng, pool, depth - 1),
        random_formula(rng, pool, depth - 1),
        random_formula(rng, pool, depth - 1),
    )
