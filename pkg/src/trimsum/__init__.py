"""Distributional approximations for slightly trimmed sums of heavy-tailed data."""

__version__ = "0.1.0"
