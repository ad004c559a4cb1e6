"""Entangled neutral mesons: oscillation, Bell inequalities, decoherence, entanglement."""

__version__ = "0.1.0"
