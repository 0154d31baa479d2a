"""pointlab: spectra, Lyapunov exponents, and dynamics of 1-D random point interactions."""

__version__ = "0.1.0"
