"""Secure two-party MLP training and inference over vertically partitioned data."""

__version__ = "1.0.0"
