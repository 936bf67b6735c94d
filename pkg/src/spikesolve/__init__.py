"""Recovery of positive atomic measures from polynomial moments."""

__version__ = "0.1.0"
