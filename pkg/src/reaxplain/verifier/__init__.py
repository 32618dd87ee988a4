"""Complete decision procedure for network-constrained feasibility
queries, with an exact rational LP at the leaves."""

from .encode import block_var, declare_block, declare_copy, encode_unrolled, out_var, transition_atoms
from .query import NetCopy, Query, QueryError
from .solver import Budget, SolveStats, SolveTimeout, SoundnessError, solve

__all__ = [
    "Budget",
    "NetCopy",
    "Query",
    "QueryError",
    "SolveStats",
    "SolveTimeout",
    "SoundnessError",
    "block_var",
    "declare_block",
    "declare_copy",
    "encode_unrolled",
    "out_var",
    "solve",
    "transition_atoms",
]
