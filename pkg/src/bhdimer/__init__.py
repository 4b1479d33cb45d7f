"""Numerical laboratory for the two-site Bose-Hubbard model.

Kept free of heavy imports so the CLI can configure threading first.
"""

__version__ = "0.1.0"
