"""Bayesian group testing under sum observations."""

__version__ = "0.1.0"
