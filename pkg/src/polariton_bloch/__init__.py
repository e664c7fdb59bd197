"""Bloch oscillations of slow-light dark-state polaritons in a magnetic washboard potential."""

__version__ = "0.1.0"
