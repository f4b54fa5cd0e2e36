"""Correlation lengths, saturation and prefactor regimes for couplings
``J_x = psi(x) exp(-|x|)`` on Z^d."""

__version__ = "0.1.0"
