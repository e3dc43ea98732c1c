"""Exact BV expectation values: homological reduction, Feynman diagrams, oracles."""
