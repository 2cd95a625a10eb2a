"""Complexity of regular grammars and how recurrent cells learn them."""

__version__ = "0.1.0"
