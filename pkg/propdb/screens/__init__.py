"""Explorer screens."""

from .command import CommandScreen, CompareScreen, DissociateScreen, EvaluateScreen, PlansScreen

__all__ = ["CommandScreen", "CompareScreen", "DissociateScreen", "EvaluateScreen", "PlansScreen"]
