"""Coded and uncoded caching over a wireless grid network.

Modules: ``gf2`` (bit vectors and elimination), ``coding`` (encoding, last-hop
keys, cache update), ``placement``, ``netsim`` (topology and retrieval),
``analysis`` (closed forms) and ``experiments`` (Monte Carlo harness).
"""

from .errors import ConfigurationError, ContractViolation
from .gf2 import BitMatrix, BitVector, EchelonBasis, rank, solve, xor_combine

__version__ = "0.1.0"

__all__ = [
    "BitMatrix", "BitVector", "ConfigurationError", "ContractViolation", "EchelonBasis",
    "rank", "solve", "xor_combine", "__version__",
]
