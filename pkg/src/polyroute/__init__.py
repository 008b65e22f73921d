"""Strategy routing for multilingual QA over black-box LLMs."""

from .strategies import ARM_SPACE, Arm, StrategyId

__all__ = ["ARM_SPACE", "Arm", "StrategyId"]
__version__ = "0.1.0"
