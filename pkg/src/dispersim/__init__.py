"""Synchronous simulator for (Byzantine) dispersion of robots on capacitated port-labeled graphs."""

__version__ = "0.1.0"
