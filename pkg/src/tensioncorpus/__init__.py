"""Corpus analysis engine for intergovernmental committee summary records."""

__version__ = "0.1.0"
