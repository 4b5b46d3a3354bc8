"""Rigid surface registration with a two-stage genetic algorithm.

The search runs over all six motion parameters, or over the translation alone
when the rotation between the views is already known.
"""

__version__ = "0.1.0"
