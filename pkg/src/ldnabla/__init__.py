"""Kernel and ground-logic engine for a logic of definitions with nabla and induction."""

__version__ = "0.1.0"
