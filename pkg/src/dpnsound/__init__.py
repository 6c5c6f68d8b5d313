"""Data-aware soundness checking for Data Petri nets."""

__version__ = "0.1.0"
