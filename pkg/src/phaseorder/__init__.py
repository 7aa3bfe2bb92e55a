"""Energy-driven compiler phase-order exploration."""

__version__ = "0.1.0"
