"""Field- and time-normalized impact indicators for zero-inflated count data."""

__version__ = "0.1.0"
