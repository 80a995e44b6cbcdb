"""Constrained GAN for 1-minute load profiles learned from 15-minute smart-meter data."""

__version__ = "0.1.0"
