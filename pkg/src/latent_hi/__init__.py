"""Latent-space health indicators (RaPP distances and MC-dropout uncertainty) for RUL benchmarking."""

__version__ = "0.1.0"
