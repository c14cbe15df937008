"""Generation and certification of positive non-decomposable maps."""

__version__ = "0.1.0"
