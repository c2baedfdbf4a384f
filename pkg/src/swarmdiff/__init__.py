"""Diffusion-model fragment scheduling for P2P swarms."""

__version__ = "0.1.0"
