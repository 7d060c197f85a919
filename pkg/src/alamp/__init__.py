"""Adaptive multi-patch selection, layout graphs and a permutation-invariant
aesthetics classifier, implemented with numpy."""

__version__ = "0.1.0"
