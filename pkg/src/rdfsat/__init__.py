"""Decision procedure for reals with differentiable functions."""

from __future__ import annotations

__version__ = "0.1.0"

from .parser import ParseError, format_formula, parse, parse_file
from .pipeline import Config, Decision, decide
from .semantics import ExplicitModel, Verdict, evaluate
from .syntax import domain_vars, validate

__all__ = [
    "__version__", "parse", "parse_file", "format_formula", "ParseError", "validate",
    "domain_vars", "evaluate", "Verdict", "ExplicitModel", "decide", "Config", "Decision",
]
