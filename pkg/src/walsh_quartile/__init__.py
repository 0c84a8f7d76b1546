"""Exact Walsh phase-plane analysis of the quartile form."""

from .dyadic import DyadicRational, compare, dyadic_arith
from .forest import Forest, Tree, size_sq
from .form import FormEvaluator, FormSpec, lambda_form
from .stepfunction import DyadicSet, StepFunction
from .tiles import Bitile, DyadicInterval, Rect, Tile, TileUniverse, bitile, tile

__all__ = [
    "Bitile", "DyadicInterval", "DyadicRational", "DyadicSet", "Forest", "FormEvaluator",
    "FormSpec", "Rect", "StepFunction", "Tile", "TileUniverse", "Tree", "bitile", "compare",
    "dyadic_arith", "lambda_form", "size_sq", "tile",
]
