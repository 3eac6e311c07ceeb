"""PV module over-temperature models, RC values, time constants and the FEM method."""

__version__ = "0.1.0"
