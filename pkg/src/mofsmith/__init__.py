"""Material-discovery agent: table search, property prediction, inverse design."""

__version__ = "0.1.0"

from .core import Gene, MofsmithError, Objective, Outcome, OutcomeLabel

__all__ = ["Gene", "MofsmithError", "Objective", "Outcome", "OutcomeLabel", "__version__"]
