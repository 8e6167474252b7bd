"""Desk-scale laboratory for heights, metrics and measures on P^1 over
adelic curves."""

__version__ = "0.1.0"
