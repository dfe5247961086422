"""Federated learning over an active-RIS assisted over-the-air aggregation channel."""

__version__ = "0.1.0"
