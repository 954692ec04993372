"""Bayesian data sketching for varying-coefficient regression."""

__version__ = "0.1.0"
