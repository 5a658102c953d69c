"""Citation classification, reference ranking and signed influence propagation."""

__version__ = "0.1.0"
