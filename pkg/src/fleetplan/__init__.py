"""Hierarchical multi-robot task planning under finite-LTL specifications.

Pipeline: parse the collaborative specification, prune its automaton against
fleet capacity, decompose the selected task sequence, enumerate feasible
allocations, synthesize per-robot strategies on pruned product automata, and
optimize total time cost with a distributed adjustment protocol (with an
exact optimizer as baseline).
"""

from .errors import FleetplanError
from .framework import RunReport, run_framework, write_reports
from .ltl import format_formula, nfa_accepts, parse_formula, to_nfa
from .scenario import Options, Scenario, generate

__all__ = [
    "FleetplanError",
    "Options",
    "RunReport",
    "Scenario",
    "format_formula",
    "generate",
    "nfa_accepts",
    "parse_formula",
    "run_framework",
    "to_nfa",
    "write_reports",
]

__version__ = "0.1.0"
