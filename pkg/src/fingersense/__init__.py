"""Sensing pipeline for an optically sensorized robotic finger."""

__version__ = "0.1.0"
