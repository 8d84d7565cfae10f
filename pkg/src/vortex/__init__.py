"""Headless operating-room team simulation backend and dialogue analytics."""

__version__ = "0.1.0"
