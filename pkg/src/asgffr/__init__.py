"""Simulation and valuation toolkit for fast-frequency response from an
asynchronous grid connection (ASG)."""

__version__ = "0.1.0"
