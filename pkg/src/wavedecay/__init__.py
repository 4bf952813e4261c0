"""Variable-coefficient 2-D wave simulation and local-energy-decay audits."""

__version__ = "0.1.0"
