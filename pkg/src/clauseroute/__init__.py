"""Constraint-based LLM routing and black-box router audit tools."""

__version__ = "0.1.0"
