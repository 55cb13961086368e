"""Volatility-volume-gap day classifier and intraday strategy validation engine."""

__version__ = "0.1.0"
