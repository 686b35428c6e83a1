"""Numerical Hermitian-Yang-Mills-Higgs tensor problem on flat complex tori."""

__version__ = "0.1.0"
