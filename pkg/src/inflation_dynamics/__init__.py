"""Systemic inflation analytics: trajectory similarity, trend centrality,
equity robustness, sector correlation and constrained portfolio weights."""

__version__ = "0.1.0"
