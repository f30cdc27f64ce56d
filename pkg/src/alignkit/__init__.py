"""Alignment-decomposed non-autoregressive translation toolkit."""

__version__ = "0.1.0"
