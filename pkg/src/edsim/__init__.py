"""Discrete-event simulation of emergency department patient flow under arrival surges."""

__version__ = "0.1.0"
