"""Simulation and analysis toolkit for g-f transmon erasure qubits."""

__version__ = "0.1.0"
