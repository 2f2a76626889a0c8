"""osreg: geometry-constrained dense registration of optical and SAR imagery."""

__version__ = "0.1.0"
