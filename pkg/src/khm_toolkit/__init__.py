"""
Toolkit for the ternary knowing-how logic: formulas, models, plan synthesis,
model checking, countermodel search, soundness fuzzing and proof checking.
"""

from .checker import evaluate, extension, synthesize, valid_on, verify_witness
from .errors import KhmError
from .model import Model, load_model
from .syntax import Formula, parse, render

__version__ = "1.0.0"

__all__ = [
    "Formula",
    "KhmError",
    "Model",
    "evaluate",
    "extension",
    "load_model",
    "parse",
    "render",
    "synthesize",
    "valid_on",
    "verify_witness",
]
