"""
Tissue growth package: a two-species porous-medium solver with a priori estimate audits.
"""

__version__ = "0.1.0"
