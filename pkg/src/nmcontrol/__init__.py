"""Optimal decoherence control of a driven two-level system in a non-Markovian Ohmic bath."""
from ._backend import BACKEND, COMPILED

__version__ = "0.1.0"
__all__ = ["BACKEND", "COMPILED", "__version__"]
