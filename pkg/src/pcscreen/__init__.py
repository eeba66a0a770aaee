"""Sparse precision-matrix estimation by Partial Correlation Screening."""

__version__ = "0.1.0"
