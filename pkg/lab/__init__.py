"""Desk-scale laboratory for model-based offline-to-online reinforcement learning."""

__version__ = "0.1.0"
