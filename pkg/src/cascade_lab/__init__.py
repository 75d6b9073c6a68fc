"""Simulation and verification toolkit for Mandelbrot multiplicative cascades."""

__version__ = "0.1.0"
