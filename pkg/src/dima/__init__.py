"""Diffusion-inspired multi-agent world model and learning-in-imagination trainer."""

__version__ = "0.1.0"
