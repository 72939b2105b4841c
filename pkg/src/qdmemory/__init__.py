"""Optimal control of broadband photon storage in multi-level atomic ensembles."""
__version__ = "0.1.0"
