"""Gesture-chain benchmarks and a numpy spiking-network engine for temporal-order recognition."""

__version__ = "0.1.0"
