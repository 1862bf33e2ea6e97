"""Duet motion modeling: pose cleaning, a tri-VAE + transformer-decoder model, and autoregressive partner generation."""

__version__ = "0.1.0"
