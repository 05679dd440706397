"""
Exception hierarchy for the toolkit.

Negative answers (a false formula, a missing plan, a rejected derivation) are
returned as values; exceptions are reserved for malformed input and misuse.
"""

from typing import FrozenSet, Iterable


class KhmError(Exception):
    """Base class for all toolkit errors."""


class FormulaSyntaxError(KhmError):
    """Malformed formula text."""

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected: FrozenSet[str] = frozenset(expected)
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class ModelError(KhmError):
    """Problems with a labeled transition system or a query against it."""


class FormatError(ModelError):
    """The model document does not have the expected JSON shape."""


class ValidationError(ModelError):
    """The model document is well-formed but violates a model invariant."""


class UnknownState(ModelError, KeyError):
    """A state id that the model does not declare."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownAction(ModelError, KeyError):
    """An action label outside the model's alphabet."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownSchema(KhmError, KeyError):
    """An axiom or definition name that the proof system does not know."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class BudgetExceeded(KhmError):
    """The countermodel search ran out of its candidate budget."""

    def __init__(self, examined: int):
        self.examined = examined
        super().__init__(f"Search budget exhausted after {examined} candidate models")


class DerivationFormatError(KhmError):
    """A derivation or corpus manifest document is malformed."""
