"""Weighted-sum-rate precoder design for downlink MISO broadcast channels."""

__version__ = "0.1.0"
