"""
Random models and bounded countermodel search.

The search enumerates every model up to the given size: first by number of
actions, then by number of states, then by transition relation (edge sets
over the cells ``(from, action, to)`` in index order, smallest sets first),
and finally by valuation of the formula's letters. The first state that
falsifies the formula, lowest index first, is reported.

All valuations of one transition relation are evaluated at once as wide
bitmasks, and relations that a renaming of states and actions maps to an
earlier one are skipped.
"""

import logging
import random
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .checker import evaluate, reachable_beliefs
from .errors import BudgetExceeded
from .model import Model, iter_bits
from .proofs import is_tautology
from .syntax import (
    And,
    Atom,
    Bot,
    Formula,
    Khm,
    Neg,
    Top,
    Univ,
    children,
    letters,
    subformulas,
)

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 100_000


@dataclass(frozen=True)
class SearchBounds:
    """
    Size limits for the countermodel search.

    Attributes:
        max_states: Largest state set tried
        max_actions: Largest alphabet tried
        max_plan_len: Plan length cap while screening candidates; defaults to
            ``2 ** max_states``, which never cuts off a plan on these sizes
    """
    max_states: int
    max_actions: int
    max_plan_len: Optional[int] = None

    def __post_init__(self):
        for name in ("max_states", "max_actions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.max_plan_len is not None and self.max_plan_len < 1:
            raise ValueError("max_plan_len must be at least 1")

    @property
    def plan_cap(self) -> int:
        if self.max_plan_len is not None:
            return self.max_plan_len
        return 2 ** self.max_states


def action_labels(count: int) -> List[str]:
    """``a``, ``b``, ... ``z``, then ``a26``, ``a27``, ..."""
    return [chr(ord("a") + i) if i < 26 else f"a{i}" for i in range(count)]


def state_ids(count: int) -> List[str]:
    return [f"s{i}" for i in range(1, count + 1)]


def random_model(
    num_states: int,
    num_actions: int,
    edge_prob: float,
    prop_list: Sequence[str],
    prop_prob: float,
    seed: int,
) -> Model:
    """
    Draw a model; the result depends only on the arguments.

    Each edge ``(s, a, t)`` is present independently with ``edge_prob`` and
    each proposition holds at each state independently with ``prop_prob``.
    All ``num_actions`` labels are in the alphabet even without edges.
    """
    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be at least 1")
    for name, prob in (("edge_prob", edge_prob), ("prop_prob", prop_prob)):
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")

    rng = random.Random(seed)
    states = state_ids(num_states)
    actions = action_labels(num_actions)

    transitions = set()
    for s in states:
        for a in actions:
            for t in states:
                if rng.random() < edge_prob:
                    transitions.add((s, a, t))

    valuation = {s: frozenset(p for p in prop_list if rng.random() < prop_prob) for s in states}
    return Model(
        states=tuple(states),
        valuation=valuation,
        transitions=frozenset(transitions),
        alphabet=tuple(actions),
    )


# ============================================================================
# All valuations at once
# ============================================================================

class _Valuations:
    """
    Every valuation of ``names`` over ``n`` states, side by side in one integer.

    Valuation ``v`` occupies the ``width``-bit block starting at bit
    ``v * width``; bit ``i`` of the block is state ``i``. Valuations are
    numbered in ``itertools.product`` order over the letters' state masks,
    so a lower block is a candidate enumerated earlier.
    """

    def __init__(self, n: int, names: Sequence[str]):
        self.n = n
        self.names = tuple(names)
        self.width = 8 * ((n + 7) // 8)
        self.count = 1 << (n * len(self.names))
        self.block = (1 << n) - 1
        self.low = ((1 << (self.width * self.count)) - 1) // ((1 << self.width) - 1)
        self.full = self.low * self.block
        self.columns = {name: self._column(j) for j, name in enumerate(self.names)}

    def masks(self, v: int) -> Tuple[int, ...]:
        """State masks of the letters in valuation ``v``."""
        last = len(self.names) - 1
        return tuple((v >> (self.n * (last - j))) & self.block for j in range(last + 1))

    def _column(self, j: int) -> int:
        shift = self.n * (len(self.names) - 1 - j)
        return self.join([(v >> shift) & self.block for v in range(self.count)])

    def split(self, x: int) -> Sequence[int]:
        if self.width == 8:
            return x.to_bytes(self.count, "little")
        return [(x >> (v * self.width)) & self.block for v in range(self.count)]

    def join(self, blocks: Sequence[int]) -> int:
        if self.width == 8:
            return int.from_bytes(bytes(blocks), "little")
        value = 0
        for v, block in enumerate(blocks):
            value |= block << (v * self.width)
        return value

    def universal(self, x: int) -> int:
        """Blocks where ``x`` is full become full, all others empty."""
        every = x
        for i in range(1, self.n):
            every &= x >> i
        # block-start bits are n apart, so the product has no carries
        return (every & self.low) * self.block


def _goal_closure(beliefs: Iterable[int], full: int) -> int:
    """Bit ``g`` set iff some belief state is a subset of goal ``g``."""
    ok = 0
    for belief in sorted(beliefs, key=lambda b: bin(b).count("1")):
        if ok >> belief & 1:
            continue
        free = full & ~belief
        extra = free
        while True:
            ok |= 1 << (belief | extra)
            if not extra:
                break
            extra = (extra - 1) & free
    return ok


def _fold_wide(
    nodes: Iterable[Formula],
    values: Dict[Formula, int],
    valuations: _Valuations,
    khm: Optional[Callable[[int, int, int], int]] = None,
) -> None:
    for node in nodes:
        if node in values:
            continue
        if isinstance(node, Atom):
            value = valuations.columns[node.name]
        elif isinstance(node, Top):
            value = valuations.full
        elif isinstance(node, Bot):
            value = 0
        elif isinstance(node, Neg):
            value = valuations.full & ~values[node.body]
        elif isinstance(node, And):
            value = values[node.left] & values[node.right]
        elif isinstance(node, Univ):
            value = valuations.universal(values[node.body])
        elif isinstance(node, Khm) and khm is not None:
            value = khm(values[node.pre], values[node.mid], values[node.goal])
        else:
            raise TypeError(f"Cannot fold {node!r} here")
        values[node] = value


def _plan_dependent(nodes: Sequence[Formula]) -> List[bool]:
    """Per node: whether a Khm occurs in it, so its value depends on the edges."""
    flags: Dict[Formula, bool] = {}
    for node in nodes:
        flags[node] = isinstance(node, Khm) or any(flags[kid] for kid in children(node))
    return [flags[node] for node in nodes]


# ============================================================================
# Isomorphic edge sets
# ============================================================================

class _Renamings:
    """
    Images of an edge set under every non-identity renaming of states and actions.

    Edge sets are bitmasks over the cells ``(i, a, j)``, cell index
    ``(i * num_actions + a) * n + j``. Each renaming is stored as one lookup
    table per byte of the mask.
    """

    def __init__(self, n: int, num_actions: int):
        identity = (tuple(range(n)), tuple(range(num_actions)))
        self.tables: List[List[List[int]]] = []
        for sigma in permutations(range(n)):
            for tau in permutations(range(num_actions)):
                if (sigma, tau) == identity:
                    continue
                cell_map = [
                    (sigma[i] * num_actions + tau[a]) * n + sigma[j]
                    for i in range(n)
                    for a in range(num_actions)
                    for j in range(n)
                ]
                self.tables.append(self._byte_tables(cell_map))

    @staticmethod
    def _byte_tables(cell_map: Sequence[int]) -> List[List[int]]:
        tables = []
        for base in range(0, len(cell_map), 8):
            chunk = cell_map[base:base + 8]
            table = [0] * 256
            for byte in range(1, 1 << len(chunk)):
                low = (byte & -byte).bit_length() - 1
                table[byte] = table[byte & (byte - 1)] | (1 << chunk[low])
            tables.append(table)
        return tables

    def is_first(self, edges: int) -> bool:
        """True when no renaming maps ``edges`` to an edge set enumerated earlier."""
        for tables in self.tables:
            image = 0
            rest = edges
            for table in tables:
                image |= table[rest & 0xFF]
                rest >>= 8
            diff = image ^ edges
            # among equal-size sets, the one owning the lowest differing cell comes first
            if diff and not (diff & -diff & edges):
                return False
        return True


# ============================================================================
# Search
# ============================================================================

class _Level:
    """Candidates with exactly ``n`` states and ``num_actions`` actions."""

    def __init__(
        self,
        n: int,
        num_actions: int,
        valuations: _Valuations,
        fixed: Dict[Formula, int],
        plan_nodes: Sequence[Formula],
        cap: int,
    ):
        self.n = n
        self.actions = action_labels(num_actions)
        self.valuations = valuations
        self.fixed = fixed
        self.plan_nodes = plan_nodes
        self.cap = cap
        self.cells = [(i, a, j) for i in range(n) for a in range(num_actions) for j in range(n)]
        self.renamings = _Renamings(n, num_actions)

    def edge_sets(self) -> Iterator[int]:
        """Transition relations up to renaming, smallest first, then by lowest cells."""
        bits = [1 << c for c in range(len(self.cells))]
        # without Khm the edges are irrelevant and the empty relation decides
        sizes = range(len(bits) + 1) if self.plan_nodes else range(1)
        for size in sizes:
            for combo in combinations(bits, size):
                edges = sum(combo)
                if self.renamings.is_first(edges):
                    yield edges

    def truth(self, f: Formula, edges: int) -> int:
        """Wide truth set of ``f`` over all valuations of one transition relation."""
        valuations = self.valuations
        table = [[0] * self.n for _ in self.actions]
        for c in iter_bits(edges):
            i, a, j = self.cells[c]
            table[a][i] |= 1 << j
        closures: Dict[Tuple[int, int], int] = {}

        def khm(pre: int, mid: int, goal: int) -> int:
            out = []
            for p, m, g in zip(*(valuations.split(x) for x in (pre, mid, goal))):
                ok = closures.get((p, m))
                if ok is None:
                    beliefs = reachable_beliefs(table, p, m, self.cap)
                    ok = closures[(p, m)] = _goal_closure(beliefs, valuations.block)
                out.append(valuations.block if ok >> g & 1 else 0)
            return valuations.join(out)

        values = dict(self.fixed)
        _fold_wide(self.plan_nodes, values, valuations, khm)
        return values[f]

    def model(self, edges: int, v: int) -> Model:
        """The candidate with transition relation ``edges`` and valuation ``v``."""
        states = state_ids(self.n)
        names = self.valuations.names
        masks = self.valuations.masks(v)
        valuation = {
            s: frozenset(name for name, mask in zip(names, masks) if mask >> i & 1)
            for i, s in enumerate(states)
        }
        transitions = frozenset(
            (states[i], self.actions[a], states[j])
            for i, a, j in (self.cells[c] for c in iter_bits(edges))
        )
        return Model(
            states=tuple(states),
            valuation=valuation,
            transitions=transitions,
            alphabet=tuple(self.actions),
        )


def find_countermodel(
    f: Formula,
    bounds: SearchBounds,
    budget: Optional[int] = None,
) -> Optional[Tuple[Model, str]]:
    """
    Smallest-first search for a model and state falsifying ``f``.

    All valuations of one transition relation are evaluated together, and a
    transition relation is skipped when renaming states and actions turns it
    into one enumerated earlier: any countermodel on it has an isomorphic copy
    that was already examined. The result is the same as examining every
    candidate in order.

    Args:
        f: Formula to refute
        bounds: Size limits
        budget: Maximum number of candidate models (transition relation plus
            valuation) to examine; None for no limit. Skipped isomorphic
            copies are not counted.

    Returns:
        ``(model, state)`` with ``f`` false at ``state``, or None when every
        model within bounds satisfies ``f``

    Raises:
        BudgetExceeded: The budget ran out before the search space did
    """
    if is_tautology(f):
        logger.debug("Propositional tautology; no countermodel exists")
        return None

    nodes = subformulas(f)
    dependent = _plan_dependent(nodes)
    fixed_nodes = [node for node, dep in zip(nodes, dependent) if not dep]
    plan_nodes = [node for node, dep in zip(nodes, dependent) if dep]
    names = sorted(letters(f))
    layouts: Dict[int, Tuple[_Valuations, Dict[Formula, int]]] = {}
    examined = 0

    for num_actions in range(1, bounds.max_actions + 1):
        for n in range(1, bounds.max_states + 1):
            if n not in layouts:
                valuations = _Valuations(n, names)
                fixed: Dict[Formula, int] = {}
                _fold_wide(fixed_nodes, fixed, valuations)
                layouts[n] = (valuations, fixed)
            valuations, fixed = layouts[n]
            level = _Level(n, num_actions, valuations, fixed, plan_nodes, bounds.plan_cap)
            count = valuations.count

            for edges in level.edge_sets():
                remaining = count if budget is None else min(count, budget - examined)
                if remaining == 0:
                    raise BudgetExceeded(examined)

                falsified = valuations.full & ~level.truth(f, edges)
                while falsified:
                    lowest = (falsified & -falsified).bit_length() - 1
                    v, index = divmod(lowest, valuations.width)
                    if v >= remaining:
                        break
                    model = level.model(edges, v)
                    state = model.states[index]
                    if not evaluate(model, state, f):
                        examined += v + 1
                        logger.info(f"Countermodel found after {examined} candidates")
                        return model, state
                    logger.debug("Capped screening disagreed with exact evaluation")
                    falsified &= ~(valuations.block << (v * valuations.width))

                if remaining < count:
                    raise BudgetExceeded(examined + remaining)
                before = examined
                examined += count
                if examined // PROGRESS_EVERY > before // PROGRESS_EVERY:
                    logger.info(
                        f"Countermodel search: {examined} candidates, "
                        f"{n} states, {num_actions} actions"
                    )

    logger.info(f"No countermodel within bounds ({examined} candidates)")
    return None
