"""Wealth-inequality series and Bayesian structural VAR toolkit."""

__version__ = "0.1.0"
