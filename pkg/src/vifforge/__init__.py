"""vifforge: tri-lingual visual-instruction dataset factory and evaluation harness."""

__version__ = "0.1.0"
