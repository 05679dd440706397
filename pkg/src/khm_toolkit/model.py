"""
Labeled transition systems (ability maps) and plan execution.

Internally each model keeps state sets as integer bitmasks (bit ``i`` is the
``i``-th declared state) and, per action, a tuple of successor masks. The
public API speaks in state ids; the masks are shared with the checker.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

from .errors import FormatError, UnknownAction, UnknownState, ValidationError

logger = logging.getLogger(__name__)

Plan = Tuple[str, ...]
EPSILON: Plan = ()


def format_plan(plan: Sequence[str], alphabet: Optional[Sequence[str]] = None) -> str:
    """Human form of a plan; the empty plan prints as ``ε``."""
    if not plan:
        return "ε"
    return plan_to_text(plan, alphabet)


def _compact(labels: Iterable[str]) -> bool:
    return all(len(label) == 1 for label in labels)


def plan_to_text(plan: Sequence[str], alphabet: Optional[Sequence[str]] = None) -> str:
    """
    Machine form of a plan; the empty plan is the empty string.

    Labels are concatenated when every label of ``alphabet`` (the plan's own
    labels if no alphabet is given) is a single character, and joined by
    spaces otherwise. Labels never contain whitespace, so ``plan_from_text``
    with the same alphabet recovers the plan.
    """
    if _compact(plan if alphabet is None else alphabet):
        return "".join(plan)
    return " ".join(plan)


def plan_from_text(text: str, alphabet: Sequence[str]) -> Plan:
    """Inverse of ``plan_to_text`` for plans over ``alphabet``."""
    if _compact(alphabet):
        return tuple(text)
    return tuple(text.split())


def iter_bits(mask: int) -> Iterator[int]:
    """Indices of the set bits of ``mask``, lowest first."""
    index = 0
    while mask:
        if mask & 1:
            yield index
        mask >>= 1
        index += 1


def step_mask(succ: Sequence[int], mask: int) -> Optional[int]:
    """
    Uniform one-step image of a state set.

    Returns:
        The union of successors, or None if some member has no successor
    """
    image = 0
    index = 0
    while mask:
        if mask & 1:
            targets = succ[index]
            if not targets:
                return None
            image |= targets
        mask >>= 1
        index += 1
    return image


def image_mask(succ: Sequence[int], mask: int) -> int:
    """Union of successors; members without successors simply drop out."""
    image = 0
    for index in iter_bits(mask):
        image |= succ[index]
    return image


@dataclass(frozen=True)
class BeliefState:
    """A set of states the agent may be in, stored as a bitmask over the model's states."""
    mask: int

    @classmethod
    def of(cls, model: "Model", states: Iterable[str]) -> "BeliefState":
        return cls(model.mask_of(states))

    def members(self, model: "Model") -> FrozenSet[str]:
        return model.states_of(self.mask)

    def issubset(self, other: "BeliefState") -> bool:
        return self.mask & ~other.mask == 0

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    def __len__(self) -> int:
        return bin(self.mask).count("1")


@dataclass(frozen=True)
class Model:
    """
    Finite labeled transition system.

    Attributes:
        states: State ids in declaration order
        valuation: Proposition letters true at each state
        transitions: (from, action, to) triples
        alphabet: Action labels in declaration order; may include labels without transitions
    """
    states: Tuple[str, ...]
    valuation: Mapping[str, FrozenSet[str]]
    transitions: FrozenSet[Tuple[str, str, str]]
    alphabet: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)
    _succ: Dict[str, Tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        states = tuple(self.states)
        alphabet = tuple(self.alphabet)
        transitions = frozenset(tuple(t) for t in self.transitions)

        if not states:
            raise ValidationError("A model needs at least one state")
        if len(set(states)) != len(states):
            raise ValidationError("Duplicate state id")
        if not alphabet:
            raise ValidationError("A model needs a non-empty alphabet")
        if len(set(alphabet)) != len(alphabet):
            raise ValidationError("Duplicate action label in alphabet")
        for action in alphabet:
            if not isinstance(action, str) or not action or any(c.isspace() for c in action):
                raise ValidationError(
                    f"Action label {action!r} must be a non-empty string without whitespace"
                )

        index = {state: i for i, state in enumerate(states)}
        for state in self.valuation:
            if state not in index:
                raise ValidationError(f"Valuation mentions undeclared state {state!r}")
        valuation = {state: frozenset(self.valuation.get(state, ())) for state in states}

        succ = {action: [0] * len(states) for action in alphabet}
        for source, action, target in transitions:
            for endpoint in (source, target):
                if endpoint not in index:
                    raise ValidationError(f"Transition uses undeclared state {endpoint!r}")
            if action not in succ:
                raise ValidationError(f"Transition label {action!r} is not in the alphabet")
            succ[action][index[source]] |= 1 << index[target]

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "valuation", valuation)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_succ", {a: tuple(masks) for a, masks in succ.items()})

    def __hash__(self) -> int:
        props = tuple(tuple(sorted(self.valuation[s])) for s in self.states)
        return hash((self.states, props, self.transitions, self.alphabet))

    @property
    def full_mask(self) -> int:
        return (1 << len(self.states)) - 1

    def index_of(self, state: str) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise UnknownState(f"Unknown state {state!r}") from None

    def mask_of(self, states: Iterable[str]) -> int:
        mask = 0
        for state in states:
            mask |= 1 << self.index_of(state)
        return mask

    def states_of(self, mask: int) -> FrozenSet[str]:
        return frozenset(self.states[i] for i in iter_bits(mask))

    def successor_masks(self, action: str) -> Tuple[int, ...]:
        try:
            return self._succ[action]
        except KeyError:
            raise UnknownAction(f"Unknown action {action!r}") from None

    def succ_table(self) -> Tuple[Tuple[int, ...], ...]:
        """Successor masks for every action, in alphabet order."""
        return tuple(self._succ[a] for a in self.alphabet)

    def atom_mask(self, name: str) -> int:
        mask = 0
        for i, state in enumerate(self.states):
            if name in self.valuation[state]:
                mask |= 1 << i
        return mask


# ============================================================================
# Plan execution
# ============================================================================

def successors(m: Model, s: str, a: str) -> FrozenSet[str]:
    """States reachable from ``s`` by one ``a`` step."""
    succ = m.successor_masks(a)
    return m.states_of(succ[m.index_of(s)])


def progress(m: Model, b: BeliefState, a: str) -> Optional[BeliefState]:
    """
    Execute ``a`` uniformly from every state of ``b``.

    Returns:
        The successor belief state, or None (blocked) if some member of ``b``
        has no ``a``-successor. The empty belief state progresses to itself.
    """
    image = step_mask(m.successor_masks(a), b.mask)
    if image is None:
        return None
    return BeliefState(image)


def _check_plan(m: Model, plan: Sequence[str]) -> Tuple[Tuple[int, ...], ...]:
    return tuple(m.successor_masks(a) for a in plan)


def run_plan(m: Model, s: str, plan: Sequence[str]) -> FrozenSet[str]:
    """All states ``t`` with ``s --plan--> t``; the empty plan yields ``{s}``."""
    current = 1 << m.index_of(s)
    for succ in _check_plan(m, plan):
        current = image_mask(succ, current)
    return m.states_of(current)


def strongly_executable(m: Model, s: str, plan: Sequence[str]) -> bool:
    """Every state reached by a proper prefix of ``plan`` can perform the next action."""
    current = 1 << m.index_of(s)
    for succ in _check_plan(m, plan):
        current = step_mask(succ, current)
        if current is None:
            return False
    return True


def strongly_chi_executable(m: Model, s: str, plan: Sequence[str], chi: Iterable[str]) -> bool:
    """
    Strong executability plus: states reached after ``k`` steps, ``0 < k < len(plan)``,
    all lie in ``chi``. Start and end states are unconstrained.
    """
    chi_mask = m.mask_of(chi)
    current = 1 << m.index_of(s)
    tables = _check_plan(m, plan)
    for k, succ in enumerate(tables, start=1):
        current = step_mask(succ, current)
        if current is None:
            return False
        if k < len(tables) and current & ~chi_mask:
            return False
    return True


# ============================================================================
# JSON model files
# ============================================================================

def _object_without_duplicates(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise ValidationError(f"Duplicate key {key!r}")
        result[key] = value
    return result


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise FormatError(message)


def load_model(data: Union[bytes, str]) -> Model:
    """
    Decode a model document.

    Args:
        data: UTF-8 JSON text in the model file format

    Returns:
        Validated model; without an ``alphabet`` key the alphabet is the labels
        used by transitions, in order of first use

    Raises:
        FormatError: Bad JSON or wrong document shape
        ValidationError: Dangling or duplicate state ids, empty state set, ...
    """
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        doc = json.loads(text, object_pairs_hook=_object_without_duplicates)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"Model is not valid UTF-8 JSON: {e}") from None

    _require(isinstance(doc, dict), "Model document must be a JSON object")
    _require("states" in doc, 'Model document needs a "states" object')
    raw_states = doc["states"]
    _require(isinstance(raw_states, dict), '"states" must map state ids to proposition lists')

    valuation = {}
    for state, props in raw_states.items():
        _require(
            isinstance(props, list) and all(isinstance(p, str) for p in props),
            f"Propositions of state {state!r} must be a list of strings",
        )
        valuation[state] = frozenset(props)

    raw_transitions = doc.get("transitions", [])
    _require(isinstance(raw_transitions, list), '"transitions" must be a list')
    transitions = []
    for entry in raw_transitions:
        _require(
            isinstance(entry, list) and len(entry) == 3 and all(isinstance(x, str) for x in entry),
            f"Transition {entry!r} must be a [from, action, to] triple of strings",
        )
        transitions.append(tuple(entry))

    if "alphabet" in doc:
        alphabet = doc["alphabet"]
        _require(
            isinstance(alphabet, list) and all(isinstance(a, str) for a in alphabet),
            '"alphabet" must be a list of strings',
        )
    else:
        alphabet = list(dict.fromkeys(action for _, action, _ in transitions))

    model = Model(
        states=tuple(raw_states),
        valuation=valuation,
        transitions=frozenset(transitions),
        alphabet=tuple(alphabet),
    )
    logger.debug(
        f"Loaded model with {len(model.states)} states, {len(model.transitions)} transitions"
    )
    return model


def load_model_file(path: Union[str, Path]) -> Model:
    """Read and decode a model file."""
    return load_model(Path(path).read_bytes())


def dump_model(m: Model) -> dict:
    """Encode a model in the model file format (deterministic ordering)."""
    action_order = {a: i for i, a in enumerate(m.alphabet)}
    transitions = sorted(
        m.transitions,
        key=lambda t: (m.index_of(t[0]), action_order[t[1]], m.index_of(t[2])),
    )
    return {
        "states": {s: sorted(m.valuation[s]) for s in m.states},
        "transitions": [list(t) for t in transitions],
        "alphabet": list(m.alphabet),
    }


def model_to_json(m: Model) -> str:
    return json.dumps(dump_model(m), indent=2, ensure_ascii=False)
