"""Finite-volume exact diagonalization lab for quantum spin-glass identities."""

__version__ = "0.1.0"
