"""Riesz and Coulomb gases: kernels, equilibrium measures, norms and Gibbs sampling."""
__version__ = "0.1.0"
