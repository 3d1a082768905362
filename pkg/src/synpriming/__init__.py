"""Cumulative-priming similarity between syntactic structures in language models."""

__version__ = "0.1.0"
