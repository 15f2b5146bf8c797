"""Reachability toolkit for VASS extended with integer counters.

Subpackages cover the exact operational semantics (`core`), a bounded
brute-force oracle (`oracle`), linear path scheme certificates (`lps`),
the one-counter-automaton translation and Parikh machinery (`parikh`),
a counter-program DSL with a gadget library (`ctrprog`), hardness
instance generators (`reductions`), a decomposition-based decider for
generalised systems (`klmst`), and the `zvass` command line front end
(`cli`).
"""

from __future__ import annotations

__version__ = "0.1.0"
