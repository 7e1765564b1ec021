"""Quantitative invariants of annulus maps and lens-space ECH combinatorics."""

__version__ = "0.1.0"
