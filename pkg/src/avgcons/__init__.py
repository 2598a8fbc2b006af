"""Average consensus on graphs: iterative, finite-time and exact algorithms."""

__version__ = "0.1.0"
