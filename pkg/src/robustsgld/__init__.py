"""Robust SGLD for penalised distributionally robust optimisation."""

__all__ = ["__version__"]
__version__ = "0.1.0"
