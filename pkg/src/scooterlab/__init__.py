"""ScooterLab: a desk-scale micromobility fleet testbed."""

__version__ = "0.1.0"
