"""deflab: de Finetti and mean-field numerical laboratory."""

__version__ = "0.1.0"
