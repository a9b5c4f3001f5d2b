"""Command-line interface."""

__all__ = []
