"""Numerical checks for rotationally symmetric ancient Ricci flows and necks."""

__version__ = "0.1.0"
