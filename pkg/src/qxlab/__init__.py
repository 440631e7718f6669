"""Desk-scale laboratory for quantum expanders, commutant spectral gaps and
quantifier-elimination tests of type I tracial von Neumann algebras."""

__version__ = "0.1.0"
