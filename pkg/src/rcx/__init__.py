"""Counterfactual edge-mask explanations for small graph neural networks."""

__version__ = "0.1.0"
