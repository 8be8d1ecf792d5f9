"""Bootstrap learning: gradient-free training of shallow networks."""

__version__ = "0.1.0"
