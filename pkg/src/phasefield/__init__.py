"""Second-order phase-field fracture energies discretised with quadratic B-splines."""

__version__ = "0.1.0"
