"""Exact probabilistic reachability for acyclic duration probabilistic automata."""

__version__ = "0.1.0"
