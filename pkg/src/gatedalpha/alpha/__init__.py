"""Formulaic alpha language: parser, evaluator and factor tensors."""

from .ast import AlphaExpr, Binary, Conditional, Const, CrossSectional, Field, TimeSeries, Unary
from .evaluate import (
    FactorMatrix,
    evaluate,
    evaluate_library,
    load_alpha_file,
    standardize_cross_section,
    starter_library,
)
from .parser import ParseError, UnknownNameError, parse, parse_library, to_source

__all__ = [
    "AlphaExpr",
    "Binary",
    "Conditional",
    "Const",
    "CrossSectional",
    "FactorMatrix",
    "Field",
    "ParseError",
    "TimeSeries",
    "Unary",
    "UnknownNameError",
    "evaluate",
    "evaluate_library",
    "load_alpha_file",
    "parse",
    "parse_library",
    "standardize_cross_section",
    "starter_library",
    "to_source",
]
