"""Random forests of interaction trees (RFIT) for individualized treatment effects."""

__version__ = "0.1.0"

__all__ = ["__version__"]
