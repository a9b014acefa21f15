"""Guarded-command modeling language: parsing, printing and semantics."""
from .ast import Program
from .model import Model, build_explicit, check_guard_overlap, eval_expr, step_semantics
from .parser import parse, parse_expr, parse_file
from .printer import expr_str, program_str

__all__ = [
    "Model",
    "Program",
    "build_explicit",
    "check_guard_overlap",
    "eval_expr",
    "expr_str",
    "parse",
    "parse_expr",
    "parse_file",
    "program_str",
    "step_semantics",
]
