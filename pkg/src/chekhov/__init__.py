"""Discover, label and evaluate Chekhov's Gun entities in interactive fiction."""

__version__ = "0.1.0"
