"""Formulaic alpha factors and gated deep MLPs for excess-return sign prediction."""

__version__ = "0.1.0"
