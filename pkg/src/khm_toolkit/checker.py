"""
Semantic evaluation of formulas over finite models.

Truth sets are bitmasks over the model's states. The Khm clause is decided by
a breadth-first search over belief states (uniform plan synthesis);
``verify_witness`` and ``brute_force`` re-check that search from the
definition, one start state at a time.
"""

import logging
import threading
import weakref
from collections import deque
from dataclasses import dataclass
from typing import (
    Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple,
)

from .model import Model, Plan, iter_bits, run_plan, step_mask, strongly_chi_executable
from .syntax import And, Atom, Bot, Formula, Khm, Neg, Top, Univ, subformulas

logger = logging.getLogger(__name__)

SuccTable = Sequence[Sequence[int]]
PlanOracle = Callable[[int, int, int], bool]


@dataclass(frozen=True)
class Extension:
    """The states of one model at which ``formula`` holds."""
    formula: Formula
    states: FrozenSet[str]


# ============================================================================
# Belief-state plan search
# ============================================================================

def search_plan(
    table: SuccTable,
    pre: int,
    mid: int,
    goal: int,
    max_len: Optional[int] = None,
) -> Optional[Tuple[int, ...]]:
    """
    Shortest uniform plan from belief state ``pre`` into ``goal``.

    Args:
        table: Successor masks per action index (alphabet order)
        pre: Start belief state
        mid: States allowed strictly between start and end
        goal: Target states
        max_len: Optional cap on the plan length

    Returns:
        Action indices of the shortest plan, lexicographically least among
        equally short ones, or None if no plan exists within the cap
    """
    if pre & ~goal == 0:
        return ()

    # depth-0 start is exempt from mid; nodes below are keyed by belief state
    parents: Dict[int, Tuple[Optional[int], int]] = {}
    queue = deque([(pre, 0, True)])
    expanded = 0

    while queue:
        node, depth, is_root = queue.popleft()
        if max_len is not None and depth >= max_len:
            continue
        expanded += 1
        for action, succ in enumerate(table):
            image = step_mask(succ, node)
            if image is None or image in parents:
                continue
            parents[image] = (None if is_root else node, action)
            if image & ~goal == 0:
                logger.debug(f"Plan of length {depth + 1} found after {expanded} expansions")
                return _unwind(parents, image)
            if image & ~mid == 0:
                queue.append((image, depth + 1, False))

    logger.debug(f"No plan; {expanded} belief states expanded")
    return None


def reachable_beliefs(
    table: SuccTable,
    pre: int,
    mid: int,
    max_len: Optional[int] = None,
) -> Set[int]:
    """
    Belief states reachable from ``pre`` by uniform plans through ``mid``.

    ``pre`` itself (the empty plan) is included. ``search_plan`` finds a plan
    into ``goal`` exactly when some member of the result is a subset of
    ``goal``; the exploration is the same, without stopping at a goal.
    """
    found = {pre}
    seen: Set[int] = set()
    queue = deque([(pre, 0)])
    while queue:
        node, depth = queue.popleft()
        if max_len is not None and depth >= max_len:
            continue
        for succ in table:
            image = step_mask(succ, node)
            if image is None or image in seen:
                continue
            seen.add(image)
            found.add(image)
            if image & ~mid == 0:
                queue.append((image, depth + 1))
    return found


def _unwind(parents: Mapping[int, Tuple[Optional[int], int]], node: int) -> Tuple[int, ...]:
    actions: List[int] = []
    current: Optional[int] = node
    while current is not None:
        parent, action = parents[current]
        actions.append(action)
        current = parent
    return tuple(reversed(actions))


def fold_masks(
    nodes: Iterable[Formula],
    values: Dict[Formula, int],
    atom_mask: Callable[[str], int],
    full: int,
    has_plan: PlanOracle,
) -> None:
    """
    Fill ``values`` with the truth set of every node.

    ``nodes`` must list children before parents (see ``subformulas``).
    """
    for node in nodes:
        if node in values:
            continue
        if isinstance(node, Atom):
            value = atom_mask(node.name) & full
        elif isinstance(node, Top):
            value = full
        elif isinstance(node, Bot):
            value = 0
        elif isinstance(node, Neg):
            value = full & ~values[node.body]
        elif isinstance(node, And):
            value = values[node.left] & values[node.right]
        elif isinstance(node, Univ):
            value = full if values[node.body] == full else 0
        elif isinstance(node, Khm):
            found = has_plan(values[node.pre], values[node.mid], values[node.goal])
            value = full if found else 0
        else:
            raise TypeError(f"Not a formula: {node!r}")
        values[node] = value


# ============================================================================
# Per-model evaluator
# ============================================================================

class Evaluator:
    """
    Memoising evaluator bound to one model.

    Truth sets are cached per subformula and plans per (pre, mid, goal)
    triple. A lock serialises cache fills so one instance can be shared
    between threads.
    """

    def __init__(self, model: Model):
        self.model = model
        self._table = model.succ_table()
        self._values: Dict[Formula, int] = {}
        self._plans: Dict[Tuple[int, int, int], Optional[Plan]] = {}
        self._lock = threading.RLock()

    def plan_for(self, pre: int, mid: int, goal: int) -> Optional[Plan]:
        key = (pre, mid, goal)
        with self._lock:
            if key not in self._plans:
                indices = search_plan(self._table, pre, mid, goal)
                self._plans[key] = (
                    None if indices is None else tuple(self.model.alphabet[i] for i in indices)
                )
            return self._plans[key]

    def mask(self, f: Formula) -> int:
        with self._lock:
            if f not in self._values:
                fold_masks(
                    subformulas(f),
                    self._values,
                    self.model.atom_mask,
                    self.model.full_mask,
                    lambda pre, mid, goal: self.plan_for(pre, mid, goal) is not None,
                )
            return self._values[f]

    def holds(self, s: str, f: Formula) -> bool:
        bit = 1 << self.model.index_of(s)
        return bool(self.mask(f) & bit)

    def extension(self, f: Formula) -> Extension:
        return Extension(f, self.model.states_of(self.mask(f)))

    def witness(self, f: Khm) -> Optional[Plan]:
        """Witness plan of a Khm formula, or None when it is false."""
        return self.plan_for(self.mask(f.pre), self.mask(f.mid), self.mask(f.goal))


_evaluators: Dict[int, Evaluator] = {}
_evaluators_lock = threading.Lock()


def _forget_evaluator(key: int) -> None:
    # runs from the model's finalizer, possibly inside a locked section
    _evaluators.pop(key, None)


def evaluator_for(m: Model) -> Evaluator:
    """
    Shared evaluator for this exact model object; dropped together with it.

    Equal but distinct models get separate evaluators. The evaluator refers
    to its model weakly and must not outlive it.
    """
    key = id(m)
    with _evaluators_lock:
        evaluator = _evaluators.get(key)
        if evaluator is None:
            # a strong reference from the value would keep the model alive
            evaluator = Evaluator(weakref.proxy(m))
            _evaluators[key] = evaluator
            weakref.finalize(m, _forget_evaluator, key)
        return evaluator


# ============================================================================
# Public operations
# ============================================================================

def evaluate(m: Model, s: str, f: Formula) -> bool:
    """
    Truth of ``f`` at state ``s``.

    Raises:
        UnknownState: If ``s`` is not a state of ``m``
    """
    return evaluator_for(m).holds(s, f)


def extension(m: Model, f: Formula) -> FrozenSet[str]:
    """All states of ``m`` where ``f`` holds."""
    return evaluator_for(m).extension(f).states


def valid_on(m: Model, f: Formula) -> bool:
    """``f`` holds at every state of ``m``."""
    return evaluator_for(m).mask(f) == m.full_mask


def synthesize(
    m: Model,
    pre: Iterable[str],
    mid: Iterable[str],
    goal: Iterable[str],
) -> Optional[Plan]:
    """
    Shortest, then alphabet-least, uniform plan from ``pre`` to ``goal``
    keeping intermediate states inside ``mid``.

    Returns:
        The plan (``()`` when ``pre`` already lies in ``goal``, in particular
        when ``pre`` is empty), or None if no such plan exists
    """
    return evaluator_for(m).plan_for(m.mask_of(pre), m.mask_of(mid), m.mask_of(goal))


def verify_witness(
    m: Model,
    pre: Iterable[str],
    mid: Iterable[str],
    goal: Iterable[str],
    plan: Sequence[str],
) -> bool:
    """Check a candidate plan against the Khm truth condition state by state."""
    if any(action not in m.alphabet for action in plan):
        return False
    mid = frozenset(mid)
    goal = frozenset(goal)
    for s in pre:
        if not strongly_chi_executable(m, s, plan, mid):
            return False
        if not run_plan(m, s, plan) <= goal:
            return False
    return True


def brute_force(
    m: Model,
    pre: Iterable[str],
    mid: Iterable[str],
    goal: Iterable[str],
    max_len: int,
) -> Optional[Plan]:
    """
    First plan, in length-then-alphabet order, accepted by ``verify_witness``.

    Prefixes that are blocked or leave ``mid`` cannot be extended and are
    dropped; prefixes sending every start state to the same sets as an
    earlier prefix are dropped too, since all their extensions behave alike.
    """
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    pre = tuple(pre)
    mid_mask = m.mask_of(mid)
    mid = m.states_of(mid_mask)
    goal = frozenset(goal)

    if verify_witness(m, pre, mid, goal, ()):
        return ()

    frontier: List[Tuple[Plan, Tuple[int, ...]]] = [((), tuple(1 << m.index_of(s) for s in pre))]
    seen = set()
    for _ in range(max_len):
        extended: List[Tuple[Plan, Tuple[int, ...]]] = []
        for plan, images in frontier:
            for action in m.alphabet:
                succ = m.successor_masks(action)
                stepped = [step_mask(succ, image) for image in images]
                if any(image is None for image in stepped):
                    continue
                candidate = plan + (action,)
                if verify_witness(m, pre, mid, goal, candidate):
                    return candidate
                key = tuple(stepped)
                if any(image & ~mid_mask for image in key) or key in seen:
                    continue
                seen.add(key)
                extended.append((candidate, key))
        frontier = extended
        if not frontier:
            break
    return None


def falsifying_states(m: Model, f: Formula) -> List[str]:
    """States where ``f`` fails, in declaration order."""
    mask = m.full_mask & ~evaluator_for(m).mask(f)
    return [m.states[i] for i in iter_bits(mask)]
