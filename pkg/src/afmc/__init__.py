"""Monte-Carlo tools for additive functionals of Markov chains and their local-time limits."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConfigurationError, DomainError, NumericFailure
from .sources import IncrementLaw, RngStream, streams
from .processes import PathGrid, ProcessSpec
from .functionals import FunctionalSpec, TwoTimeField, eval_additive, eval_psi

__all__ = [
    "ConfigurationError", "DomainError", "NumericFailure", "IncrementLaw", "RngStream", "streams",
    "PathGrid", "ProcessSpec", "FunctionalSpec", "TwoTimeField", "eval_additive", "eval_psi",
]
