"""Desk-scale laboratory for measuring sample complexity of stochastic
optimization over integer and continuous feasible sets."""

__version__ = "0.1.0"
