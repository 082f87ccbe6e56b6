"""Intention-aware latent world model for desk-scale driving planning."""

__version__ = "0.1.0"
